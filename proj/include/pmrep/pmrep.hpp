#pragma once

#include "pmrep/elliptic.hpp"
#include "pmrep/error.hpp"
#include "pmrep/grid.hpp"
#include "pmrep/mckean_sde.hpp"
#include "pmrep/monotone_graph.hpp"
#include "pmrep/phi.hpp"
#include "pmrep/pme_solver.hpp"
#include "pmrep/rng.hpp"
#include "pmrep/verification.hpp"
