#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmrep/elliptic.hpp"
#include "pmrep/error.hpp"
#include "pmrep/grid.hpp"
#include "pmrep/monotone_graph.hpp"
#include "pmrep/pme_solver.hpp"

namespace pmrep {

/// phi(x) = He_k(y) exp(-y^2/2), y = (x - c)/s, with He_k the probabilists'
/// Hermite polynomial; phi'' = He_{k+2}(y) exp(-y^2/2) / s^2.
struct HermiteTestFunction {
  double center = 0.0;
  double scale = 1.0;
  int degree = 0;

  static double hermite(int k, double y) {
    double prev = 1.0;
    if (k == 0) return prev;
    double cur = y;
    for (int j = 1; j < k; ++j) {
      const double next = y * cur - j * prev;
      prev = cur;
      cur = next;
    }
    return cur;
  }

  double operator()(double x) const {
    const double y = (x - center) / scale;
    return hermite(degree, y) * std::exp(-0.5 * y * y);
  }

  double second_derivative(double x) const {
    const double y = (x - center) / scale;
    return hermite(degree + 2, y) * std::exp(-0.5 * y * y) / (scale * scale);
  }
};

/// Degrees 0..2 on a lattice of centres covering [-L, L]; `count` is rounded
/// up to a multiple of three.
inline std::vector<HermiteTestFunction> hermite_test_family(const Grid1D& grid, int count = 12) {
  require(count >= 1, ErrorKind::InvalidArgument, "test family needs at least one function");
  const int centers = (count + 2) / 3;
  const double spacing = 2.0 * grid.half_width() / centers;
  std::vector<HermiteTestFunction> family;
  for (int c = 0; c < centers; ++c) {
    for (int k = 0; k < 3; ++k) {
      family.push_back({-grid.half_width() + (c + 0.5) * spacing, 0.5 * spacing, k});
    }
  }
  return family;
}

enum class TimeQuadrature { Trapezoid, RightEndpoint };

/// Weak-form defect of dz/dt = (a z)'' tested against each phi:
/// |<phi, z(t)> - <phi, z0> - int_0^t <phi'' a(s), z(s)> ds|, maximised over the family.
inline std::vector<double> fokker_planck_residual(const std::vector<GridDensity>& z, const std::vector<double>& times,
                                                  const Field2D& a, const std::vector<HermiteTestFunction>& family,
                                                  TimeQuadrature rule = TimeQuadrature::Trapezoid) {
  require(!z.empty() && z.size() == times.size() && a.rows() == static_cast<int>(z.size()),
          ErrorKind::GridMismatch, "timeline, times and coefficient rows must agree");
  const Grid1D& g = z.front().grid;
  for (const auto& d : z) require_same_grid(g, d.grid);
  require(a.cols() == g.size(), ErrorKind::GridMismatch, "coefficient columns must match grid");

  const int nt = static_cast<int>(z.size());
  const double h = g.h();
  std::vector<double> residual(nt, 0.0);
  for (const auto& phi : family) {
    std::vector<double> val(g.size());
    std::vector<double> dd(g.size());
    for (int i = 0; i < g.size(); ++i) {
      val[i] = phi(g.node(i));
      dd[i] = phi.second_derivative(g.node(i));
    }
    const auto pair = [&](int k) {
      double s = 0.0;
      for (int i = 0; i < g.size(); ++i) s += val[i] * z[k].values[i];
      return h * s;
    };
    const auto generator = [&](int k) {
      double s = 0.0;
      for (int i = 0; i < g.size(); ++i) s += dd[i] * a(k, i) * z[k].values[i];
      return h * s;
    };
    const double start = pair(0);
    double integral = 0.0;
    double gen_prev = generator(0);
    for (int k = 1; k < nt; ++k) {
      const double gen = generator(k);
      const double dt = times[k] - times[k - 1];
      integral += rule == TimeQuadrature::Trapezoid ? 0.5 * dt * (gen + gen_prev) : dt * gen;
      gen_prev = gen;
      residual[k] = std::max(residual[k], std::abs(pair(k) - start - integral));
    }
  }
  return residual;
}

struct GEpsTable {
  std::vector<double> eps;
  std::vector<double> times;
  /// values[e][k] = g_eps[e] at times[k].
  std::vector<std::vector<double>> values;

  double max_over_time(std::size_t e) const {
    return values[e].empty() ? 0.0 : *std::max_element(values[e].begin(), values[e].end());
  }
  double min_value() const {
    double m = 0.0;
    for (const auto& row : values) {
      for (double v : row) m = std::min(m, v);
    }
    return m;
  }
};

/// g_eps(z1(t) - z2(t)) over a shared time base for each eps in the ladder.
inline GEpsTable uniqueness_diagnostic(const std::vector<SignedGridMeasure>& z1,
                                       const std::vector<SignedGridMeasure>& z2, const std::vector<double>& times,
                                       const std::vector<double>& eps_ladder) {
  require(z1.size() == z2.size() && z1.size() == times.size(), ErrorKind::GridMismatch,
          "timelines must share the time base");
  GEpsTable table;
  table.eps = eps_ladder;
  table.times = times;
  for (double eps : eps_ladder) {
    std::vector<double> row;
    row.reserve(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) row.push_back(g_eps_functional(eps, z1[k] - z2[k]));
    table.values.push_back(std::move(row));
  }
  return table;
}

inline GEpsTable uniqueness_diagnostic(const std::vector<GridDensity>& z1, const std::vector<GridDensity>& z2,
                                       const std::vector<double>& times, const std::vector<double>& eps_ladder) {
  std::vector<SignedGridMeasure> m1;
  std::vector<SignedGridMeasure> m2;
  for (const auto& d : z1) m1.push_back(SignedGridMeasure::from_density(d));
  for (const auto& d : z2) m2.push_back(SignedGridMeasure::from_density(d));
  return uniqueness_diagnostic(m1, m2, times, eps_ladder);
}

struct InvariantCheck {
  std::string name;
  bool passed = true;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct DiagnosticReport {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> min_value;
  std::vector<double> linf;
  std::vector<double> l2;
  std::vector<double> l1_distance;
  std::vector<double> w1_distance;
  std::vector<double> residual;
  std::map<double, std::vector<double>> g_eps;
  double kappa = 0.0;
  /// (int_kappa^T ||u(t)||_2^2 dt)^{1/2}
  double l2_space_time = 0.0;
  std::vector<InvariantCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed; });
  }
  const InvariantCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

struct ConservationTolerances {
  double mass = 1e-6;
  double positivity = 1e-12;
  double linf = 1e-12;
  /// kappa as a fraction of the final time.
  double kappa_fraction = 0.1;
};

/// Mass, positivity and L_inf tracking for a density timeline; every breach
/// is recorded with its time and node.
inline DiagnosticReport conservation_report(const std::vector<GridDensity>& timeline, const std::vector<double>& times,
                                            const ConservationTolerances& tol = {}) {
  require(!timeline.empty() && timeline.size() == times.size(), ErrorKind::InvalidArgument,
          "timeline and times must be non-empty and aligned");
  DiagnosticReport rep;
  rep.times = times;
  for (const auto& d : timeline) {
    rep.mass.push_back(mass(d));
    rep.min_value.push_back(min_value(d));
    rep.linf.push_back(norm_linf(d));
    rep.l2.push_back(norm_l2(d));
  }
  rep.kappa = tol.kappa_fraction * times.back();
  double acc = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (times[k] <= rep.kappa) continue;
    acc += (times[k] - std::max(times[k - 1], rep.kappa)) * rep.l2[k] * rep.l2[k];
  }
  rep.l2_space_time = std::sqrt(acc);

  const auto locate = [&](std::size_t k, auto pred) {
    const auto& d = timeline[k];
    for (int i = 0; i < d.grid.size(); ++i) {
      if (pred(d.values[i])) {
        std::ostringstream os;
        os << "t=" << times[k] << ", x=" << d.grid.node(i) << ", value=" << d.values[i];
        return os.str();
      }
    }
    return std::string();
  };

  InvariantCheck mass_check{"mass_conservation", true, 0.0, tol.mass, ""};
  InvariantCheck pos_check{"positivity", true, 0.0, -tol.positivity, ""};
  InvariantCheck linf_check{"linf_bound", true, 0.0, rep.linf.front() + tol.linf, ""};
  for (std::size_t k = 0; k < timeline.size(); ++k) {
    const double drift = std::abs(rep.mass[k] - rep.mass.front());
    mass_check.value = std::max(mass_check.value, drift);
    if (drift > tol.mass && mass_check.passed) {
      mass_check.passed = false;
      std::ostringstream os;
      os << "mass drift " << drift << " at t=" << times[k];
      mass_check.detail = os.str();
    }
    pos_check.value = std::min(pos_check.value, rep.min_value[k]);
    if (rep.min_value[k] < -tol.positivity && pos_check.passed) {
      pos_check.passed = false;
      pos_check.detail = locate(k, [&](double v) { return v < -tol.positivity; });
    }
    linf_check.value = std::max(linf_check.value, rep.linf[k]);
    if (rep.linf[k] > linf_check.threshold && linf_check.passed) {
      linf_check.passed = false;
      const double bound = linf_check.threshold;
      linf_check.detail = locate(k, [bound](double v) { return std::abs(v) > bound; });
    }
  }
  rep.checks = {mass_check, pos_check, linf_check};
  return rep;
}

inline DiagnosticReport conservation_report(const PMESolution& sol, const ConservationTolerances& tol = {}) {
  std::vector<GridDensity> timeline;
  timeline.reserve(sol.times.size());
  for (int k = 0; k < static_cast<int>(sol.times.size()); ++k) timeline.push_back(sol.density(k));
  return conservation_report(timeline, sol.times, tol);
}

/// eta(t, x) in beta(u(t, x)) widened by tol at every node.
inline InvariantCheck selection_check(const PMESolution& sol, const MonotoneGraph& graph, double tol) {
  InvariantCheck c{"selection_validity", true, 0.0, tol, ""};
  for (int k = 0; k < sol.u.rows(); ++k) {
    for (int i = 0; i < sol.u.cols(); ++i) {
      const Interval s = graph.section(sol.u(k, i));
      const double e = sol.eta(k, i);
      const double gap = std::max({0.0, s.lo - e, e - s.hi});
      c.value = std::max(c.value, gap);
      if (gap > tol && c.passed) {
        c.passed = false;
        std::ostringstream os;
        os << "t=" << sol.times[k] << ", x=" << sol.config.grid.node(i);
        c.detail = os.str();
      }
    }
  }
  return c;
}

}  // namespace pmrep
