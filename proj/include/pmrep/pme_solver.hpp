#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "pmrep/error.hpp"
#include "pmrep/grid.hpp"
#include "pmrep/monotone_graph.hpp"
#include "pmrep/phi.hpp"

namespace pmrep {

/// Row-major (time x node) table.
class Field2D {
 public:
  Field2D() = default;
  Field2D(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<double> row(int k) { return {data_.data() + static_cast<std::size_t>(k) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int k) const {
    return {data_.data() + static_cast<std::size_t>(k) * cols_, static_cast<std::size_t>(cols_)};
  }
  double& operator()(int k, int i) { return data_[static_cast<std::size_t>(k) * cols_ + i]; }
  double operator()(int k, int i) const { return data_[static_cast<std::size_t>(k) * cols_ + i]; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

enum class Boundary { DirichletZero };

struct PMEConfig {
  Grid1D grid{8.0, 512};
  double t_final = 1.0;
  int n_steps = 256;
  double gs_tol = 1e-10;
  int gs_max_sweeps = 100000;
  Boundary boundary = Boundary::DirichletZero;

  double step() const { return t_final / n_steps; }

  void validate() const {
    require(t_final > 0.0, ErrorKind::InvalidArgument, "t_final must be positive");
    require(n_steps >= 1, ErrorKind::InvalidArgument, "n_steps must be at least 1");
    require(gs_tol > 0.0, ErrorKind::InvalidArgument, "gs_tol must be positive");
    require(gs_max_sweeps >= 2, ErrorKind::InvalidArgument, "gs_max_sweeps must be at least 2");
  }
};

struct SolverTolerances {
  double gs_tol = 1e-10;
  int gs_max_sweeps = 100000;
};

/// One implicit step: u solves u - lambda Delta_h w = u_prev with w in beta(u)/2.
struct StepResult {
  GridDensity u;
  GridDensity w;
  int sweeps = 0;
  double residual = 0.0;
};

struct PMESolution {
  PMEConfig config;
  std::vector<double> times;
  Field2D u;
  Field2D eta;
  Field2D chi;
  std::vector<int> sweeps;
  std::vector<double> residuals;

  int steps() const { return static_cast<int>(times.size()) - 1; }

  GridDensity density(int k) const {
    const auto r = u.row(k);
    return GridDensity(config.grid, std::vector<double>(r.begin(), r.end()));
  }
  GridDensity eta_density(int k) const {
    const auto r = eta.row(k);
    return GridDensity(config.grid, std::vector<double>(r.begin(), r.end()));
  }
};

namespace detail {

/// l_inf residual of u + mu b - (mu/2)(b_{i-1} + b_{i+1}) - u_prev, zero ghosts.
inline double step_residual(std::span<const double> u, std::span<const double> b, std::span<const double> u_prev,
                            double mu) {
  const std::size_t n = u.size();
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? b[i - 1] : 0.0;
    const double right = i + 1 < n ? b[i + 1] : 0.0;
    r = std::max(r, std::abs(u[i] + mu * b[i] - 0.5 * mu * (left + right) - u_prev[i]));
  }
  return r;
}

}  // namespace detail

/// Symmetric nonlinear Gauss-Seidel on the discrete inclusion. Each node
/// update is the exact scalar resolvent of beta with parameter lambda/h^2.
/// `b_guess` warm-starts the selection when given.
inline StepResult resolvent_step(const GridDensity& u_prev, double lambda, const MonotoneGraph& graph,
                                 const SolverTolerances& tol = {}, const std::vector<double>* b_guess = nullptr) {
  require(lambda > 0.0, ErrorKind::InvalidArgument, "time step must be positive");
  const Grid1D& g = u_prev.grid;
  const int n = g.size();
  for (double v : u_prev.values) require(std::isfinite(v), ErrorKind::InvalidArgument, "u_prev is not finite");
  const double mu = lambda / (g.h() * g.h());

  std::vector<double> u = u_prev.values;
  std::vector<double> b(n);
  if (b_guess && static_cast<int>(b_guess->size()) == n) {
    // Warm start: keep the previous selection wherever it is still consistent.
    for (int i = 0; i < n; ++i) {
      const Interval s = graph.section(u[i]);
      b[i] = std::clamp((*b_guess)[i], s.lo, s.hi);
    }
  } else {
    for (int i = 0; i < n; ++i) b[i] = graph.section(u[i]).lo;
  }

  const auto relax = [&](int i) {
    const double left = i > 0 ? b[i - 1] : 0.0;
    const double right = i + 1 < n ? b[i + 1] : 0.0;
    const double y = u_prev.values[i] + 0.5 * mu * (left + right);
    const ResolventPoint p = graph.resolvent(mu, y);
    u[i] = p.x;
    b[i] = p.w;
  };

  StepResult out{GridDensity(g), GridDensity(g)};
  double residual = detail::step_residual(u, b, u_prev.values, mu);
  int sweeps = 0;
  while (residual > tol.gs_tol) {
    if (sweeps + 2 > tol.gs_max_sweeps) {
      std::ostringstream msg;
      msg << "Gauss-Seidel stalled after " << sweeps << " sweeps, residual " << residual;
      fail(ErrorKind::NoConvergence, msg.str());
    }
    for (int i = 0; i < n; ++i) relax(i);
    for (int i = n - 1; i >= 0; --i) relax(i);
    sweeps += 2;
    residual = detail::step_residual(u, b, u_prev.values, mu);
  }
  out.u.values = std::move(u);
  out.w.values.resize(n);
  for (int i = 0; i < n; ++i) out.w.values[i] = 0.5 * b[i];
  out.sweeps = sweeps;
  out.residual = residual;
  return out;
}

/// Iterated resolvent steps (implicit Euler on a uniform mesh). Fills u and
/// eta = 2w; chi is left empty until `chi_field` is applied.
inline PMESolution evolve(const GridDensity& u0, const MonotoneGraph& graph, const PMEConfig& cfg) {
  cfg.validate();
  require_same_grid(u0.grid, cfg.grid);
  for (double v : u0.values) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::InvalidArgument, "initial data must be finite and nonnegative");
  }
  const int n = cfg.grid.size();
  const double lambda = cfg.step();
  PMESolution sol;
  sol.config = cfg;
  sol.times.resize(cfg.n_steps + 1);
  sol.u = Field2D(cfg.n_steps + 1, n);
  sol.eta = Field2D(cfg.n_steps + 1, n);
  sol.sweeps.assign(cfg.n_steps + 1, 0);
  sol.residuals.assign(cfg.n_steps + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    sol.u(0, i) = u0.values[i];
    sol.eta(0, i) = graph.section(u0.values[i]).lo;
  }
  sol.times[0] = 0.0;

  GridDensity current = u0;
  std::vector<double> b_prev(sol.eta.row(0).begin(), sol.eta.row(0).end());
  for (int k = 1; k <= cfg.n_steps; ++k) {
    std::optional<StepResult> step;
    try {
      step.emplace(resolvent_step(current, lambda, graph, {cfg.gs_tol, cfg.gs_max_sweeps}, &b_prev));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoConvergence) throw;
      std::ostringstream msg;
      msg << "step " << k << ": " << e.what();
      fail(ErrorKind::NoConvergence, msg.str());
    }
    for (int i = 0; i < n; ++i) {
      sol.u(k, i) = step->u.values[i];
      sol.eta(k, i) = 2.0 * step->w.values[i];
      b_prev[i] = sol.eta(k, i);
    }
    sol.times[k] = k * lambda;
    sol.sweeps[k] = step->sweeps;
    sol.residuals[k] = step->residual;
    current = std::move(step->u);
  }
  return sol;
}

/// Validated selection eta in beta(u): eta u >= -tol, and eta = 0 where u = 0.
inline const Field2D& extract_eta(const PMESolution& sol, double tol = 1e-10) {
  for (int k = 0; k < sol.u.rows(); ++k) {
    for (int i = 0; i < sol.u.cols(); ++i) {
      const double u = sol.u(k, i);
      const double e = sol.eta(k, i);
      const bool sign_ok = u * e >= -tol;
      const bool zero_ok = u != 0.0 || std::abs(e) <= tol;
      if (!sign_ok || !zero_ok) {
        std::ostringstream msg;
        msg << "selection violated at t=" << sol.times[k] << ", x=" << sol.config.grid.node(i) << " (u=" << u
            << ", eta=" << e << ")";
        fail(ErrorKind::SelectionViolation, msg.str());
      }
    }
  }
  return sol.eta;
}

/// chi = sqrt(eta/u), with Phi's zero-value convention where u <= threshold.
inline Field2D chi_field(const PMESolution& sol, const PhiSpec& phi, double threshold = 1e-14) {
  extract_eta(sol);
  Field2D chi(sol.u.rows(), sol.u.cols());
  for (int k = 0; k < sol.u.rows(); ++k) {
    for (int i = 0; i < sol.u.cols(); ++i) chi(k, i) = chi_selection(sol.u(k, i), sol.eta(k, i), phi, threshold);
  }
  return chi;
}

/// Full pipeline for a diffusivity map: graph, trajectory, selection, coefficient.
inline PMESolution solve_pme(const GridDensity& u0, const PhiSpec& phi, const PMEConfig& cfg,
                             const GraphScanOptions& scan = {}) {
  const MonotoneGraph graph = from_phi(phi, scan);
  PMESolution sol = evolve(u0, graph, cfg);
  sol.chi = chi_field(sol, phi);
  return sol;
}

struct RefinementReport {
  std::vector<int> n_steps;
  /// l1 distance between final states of consecutive levels.
  std::vector<double> successive_l1;
  /// successive_l1[k] / successive_l1[k+1].
  std::vector<double> ratios;
};

/// Final-time l1 distances between runs with n_steps, 2 n_steps, 4 n_steps, ...
inline RefinementReport step_halving_study(const GridDensity& u0, const MonotoneGraph& graph, PMEConfig cfg,
                                           int levels = 3) {
  require(levels >= 2, ErrorKind::InvalidArgument, "refinement study needs two levels");
  RefinementReport rep;
  std::optional<GridDensity> prev;
  for (int l = 0; l < levels; ++l) {
    const PMESolution sol = evolve(u0, graph, cfg);
    GridDensity final_state = sol.density(sol.steps());
    rep.n_steps.push_back(cfg.n_steps);
    if (prev) rep.successive_l1.push_back(l1_distance(*prev, final_state));
    prev = std::move(final_state);
    cfg.n_steps *= 2;
  }
  for (std::size_t k = 0; k + 1 < rep.successive_l1.size(); ++k) {
    rep.ratios.push_back(rep.successive_l1[k] / rep.successive_l1[k + 1]);
  }
  return rep;
}

}  // namespace pmrep
