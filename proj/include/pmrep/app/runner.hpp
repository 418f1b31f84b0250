#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <charconv>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmrep/app/artifacts.hpp"
#include "pmrep/app/config.hpp"
#include "pmrep/elliptic.hpp"
#include "pmrep/mckean_sde.hpp"
#include "pmrep/pme_solver.hpp"
#include "pmrep/verification.hpp"

namespace pmrep::app {

enum ExitCode : int { kPass = 0, kInvariantFailure = 1, kConfigError = 2, kRuntimeError = 3 };

inline constexpr const char* kOutDirEnv = "PMREP_OUT_DIR";

/// Flag, then the environment override, then output.dir, then out/<scenario>.
inline std::filesystem::path resolve_out_dir(const std::string& flag, const RunConfig& c) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  if (!c.output.dir.empty()) return c.output.dir;
  return std::filesystem::path("out") / c.scenario;
}

/// Self-similar solution of du/dt = (1/2)(u^2)_xx with unit mass, centred at 0.
inline double barenblatt_profile(double t, double x) {
  // u = s^{-1/3} (C - x^2 s^{-2/3} / 12)_+ with s = t/2; unit mass fixes C.
  const double s = 0.5 * t;
  const double c = std::cbrt(std::pow(3.0 / (4.0 * std::sqrt(12.0)), 2.0));
  return std::max(0.0, c - x * x / (12.0 * std::cbrt(s * s))) / std::cbrt(s);
}

inline GridDensity make_initial(const InitialConfig& ic, const Grid1D& grid) {
  if (ic.kind == "barenblatt") {
    return GridDensity::sample(grid, [&](double x) { return barenblatt_profile(ic.t0, x - ic.mean); });
  }
  if (ic.kind == "uniform") {
    return GridDensity::sample(
        grid, [&](double x) { return std::abs(x - ic.mean) <= ic.half_width ? 0.5 / ic.half_width : 0.0; });
  }
  return GridDensity::sample(grid, [&](double x) {
    const double d = x - ic.mean;
    return std::exp(-0.5 * d * d / ic.variance) / std::sqrt(2.0 * std::numbers::pi * ic.variance);
  });
}

/// Closed-form solution at time t when (Phi, initial data) admit one.
inline std::optional<GridDensity> oracle_solution(const RunConfig& c, const Grid1D& grid, double t) {
  const auto& p = c.phi;
  const auto& ic = c.initial;
  if (p.kind == "constant" && p.epsilon == 0.0 && ic.kind == "gaussian") {
    const double var = ic.variance + p.value * p.value * t;
    return GridDensity::sample(grid, [&](double x) {
      const double d = x - ic.mean;
      return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
    });
  }
  if (p.kind == "power" && p.exponent == 0.5 && p.epsilon == 0.0 && ic.kind == "barenblatt") {
    // The cap must not bind: Phi^2(u) u = u^2 needs ||u||_inf <= cap^2.
    if (barenblatt_profile(ic.t0, 0.0) > p.cap * p.cap) return std::nullopt;
    return GridDensity::sample(grid, [&](double x) { return barenblatt_profile(ic.t0 + t, x - ic.mean); });
  }
  return std::nullopt;
}

struct RunOutcome {
  int exit_code = kPass;
  std::vector<InvariantCheck> checks;
  std::vector<std::string> warnings;
  nlohmann::json metrics = nlohmann::json::object();
  std::optional<std::string> error;
  std::filesystem::path out_dir;

  const InvariantCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, r.ptr};
}

inline nlohmann::json check_json(const InvariantCheck& c) {
  const auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  return {{"name", c.name}, {"passed", c.passed}, {"value", num(c.value)}, {"threshold", num(c.threshold)},
          {"detail", c.detail}};
}

inline InvariantCheck upper_check(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value <= threshold, value, threshold, std::move(detail)};
}

/// Linear interpolation of a PDE trajectory at time t.
inline GridDensity pde_at(const PMESolution& sol, double t) {
  const double lambda = sol.config.step();
  const int k = std::clamp(static_cast<int>(std::floor(t / lambda + 1e-9)), 0, sol.steps());
  if (k == sol.steps() || std::abs(t - sol.times[k]) <= 1e-12) return sol.density(k);
  const double theta = (t - sol.times[k]) / lambda;
  GridDensity d = sol.density(k);
  const auto next = sol.u.row(k + 1);
  for (int i = 0; i < d.grid.size(); ++i) d.values[i] += theta * (next[i] - d.values[i]);
  return d;
}

inline double series_at(const std::vector<double>& times, const std::vector<double>& values, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
  if (it == times.end()) return values.back();
  const std::size_t k = static_cast<std::size_t>(std::distance(times.begin(), it));
  if (k == 0 || std::abs(times[k] - t) <= 1e-12) return values[k];
  const double theta = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return values[k - 1] + theta * (values[k] - values[k - 1]);
}

inline SDEConfig sde_config(const RunConfig& c, const Grid1D& grid) {
  SDEConfig s;
  s.n_particles = c.sde.n_particles;
  s.dt = c.sde.dt;
  s.t_final = c.t_final;
  s.mode = c.sde.mode == "coupled" ? SdeMode::Coupled : SdeMode::Decoupled;
  s.epsilon_reg = c.sde.epsilon_reg;
  s.bandwidth = {c.sde.bandwidth_rule == "fixed" ? BandwidthRule::Kind::Fixed : BandwidthRule::Kind::SilvermanScaled,
                 c.sde.bandwidth};
  s.master_seed = c.seed;
  s.refresh_every = c.sde.refresh_every;
  s.snapshot_every = c.sde.snapshot_every;
  s.kde_grid = grid;
  return s;
}

inline std::string particles_csv(const SdeRun& run, int stride) {
  CsvBuilder csv("t,particle_id,position");
  const std::size_t n = run.snapshots.front().positions.size();
  csv.reserve(run.snapshots.size() * (n / stride + 1) * 32);
  for (const auto& s : run.snapshots) {
    for (std::size_t p = 0; p < n; p += stride) {
      csv << s.time << static_cast<std::uint64_t>(p) << s.positions[p];
      csv.end_row();
    }
  }
  return csv.str();
}

inline std::string marginals_csv(const SdeRun& run) {
  CsvBuilder csv("t,x,kde_value");
  for (const auto& s : run.snapshots) {
    for (int i = 0; i < s.kde->grid.size(); ++i) {
      csv << s.time << s.kde->grid.node(i) << s.kde->values[i];
      csv.end_row();
    }
  }
  return csv.str();
}

inline std::string moments_csv(const MomentReport& rep) {
  CsvBuilder csv("s,t,mean,var,m4");
  for (const auto& r : rep.rows) {
    csv << r.s << r.t << r.mean << r.variance << r.m4;
    csv.end_row();
  }
  return csv.str();
}

/// Largest |mean(Y_t - Y_0)| relative to 3 sup sqrt(t/N) over the snapshots.
inline InvariantCheck martingale_check(const SdeRun& run, double coef_sup) {
  const auto& y0 = run.snapshots.front().positions;
  const double n = static_cast<double>(y0.size());
  InvariantCheck c{"martingale_mean", true, 0.0, 1.0, ""};
  for (const auto& s : run.snapshots) {
    if (s.time == 0.0) continue;
    double m = 0.0;
    for (std::size_t p = 0; p < y0.size(); ++p) m += s.positions[p] - y0[p];
    m = std::abs(m / n);
    const double bound = 3.0 * coef_sup * std::sqrt(s.time / n);
    const double ratio = bound > 0.0 ? m / bound : (m > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (ratio > c.value) {
      c.value = ratio;
      std::ostringstream os;
      os << "t=" << s.time << ", |mean increment|=" << m << ", bound=" << bound;
      c.detail = os.str();
    }
  }
  c.passed = c.value <= 1.0;
  return c;
}

inline InvariantCheck moment_check(const MomentReport& rep) {
  InvariantCheck c{"moment_bound", rep.all_within_bound(), 0.0, 1.0, ""};
  for (const auto& r : rep.rows) {
    if (r.bound > 0.0) c.value = std::max(c.value, r.m4 / r.bound);
    else if (r.m4 > 0.0) c.value = std::numeric_limits<double>::infinity();
    if (!r.within_bound && c.detail.empty()) {
      std::ostringstream os;
      os << "s=" << r.s << ", t=" << r.t << ", m4=" << r.m4 << ", bound=" << r.bound;
      c.detail = os.str();
    }
  }
  return c;
}

inline InvariantCheck g_eps_check(const std::vector<double>& eps, const std::vector<SignedGridMeasure>& diffs,
                                  std::vector<std::vector<double>>& table) {
  InvariantCheck c{"g_eps_nonnegative", true, 0.0, 0.0, ""};
  table.assign(eps.size(), {});
  for (std::size_t e = 0; e < eps.size(); ++e) {
    for (const auto& z : diffs) {
      const double g = g_eps_functional(eps[e], z);
      table[e].push_back(g);
      const double tol = g_eps_tolerance(eps[e], z);
      c.value = std::min(c.value, g);
      if (g < -tol && c.passed) {
        c.passed = false;
        std::ostringstream os;
        os << "eps=" << eps[e] << ", g=" << g;
        c.detail = os.str();
      }
    }
  }
  return c;
}

struct DiagnosticRows {
  std::vector<double> times, mass, min, linf, l2, l1, w1, residual;
  std::vector<std::vector<double>> g_eps;
};

inline std::string diagnostics_csv(const DiagnosticRows& d, const std::vector<double>& eps) {
  std::string header = "t,mass,min,linf,l2,l1_dist,w1_dist,residual";
  for (double e : eps) header += ",g_eps_" + format_number(e);
  CsvBuilder csv(header);
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    csv << d.times[k] << d.mass[k] << d.min[k] << d.linf[k] << d.l2[k] << d.l1[k] << d.w1[k] << d.residual[k];
    for (const auto& row : d.g_eps) csv << row[k];
    csv.end_row();
  }
  return csv.str();
}

inline void density_stats(DiagnosticRows& d, const GridDensity& u) {
  d.mass.push_back(mass(u));
  d.min.push_back(min_value(u));
  d.linf.push_back(norm_linf(u));
  d.l2.push_back(norm_l2(u));
}

inline void run_pde_pipeline(const RunConfig& c, ArtifactWriter& out, RunOutcome& res) {
  const Grid1D grid(c.half_width, c.grid_n);
  const GridDensity u0 = make_initial(c.initial, grid);
  const PhiSpec phi = build_phi(c.phi, norm_linf(u0));
  const MonotoneGraph graph = from_phi(phi);
  PMEConfig cfg;
  cfg.grid = grid;
  cfg.t_final = c.t_final;
  cfg.n_steps = c.n_steps;
  cfg.gs_tol = c.gs_tol;
  cfg.gs_max_sweeps = c.gs_max_sweeps;

  PMESolution sol = evolve(u0, graph, cfg);
  sol.chi = chi_field(sol, phi, c.chi_threshold);
  res.metrics["phi"] = phi.describe();
  res.metrics["pde_max_sweeps"] = *std::max_element(sol.sweeps.begin(), sol.sweeps.end());
  res.metrics["pde_max_residual"] = *std::max_element(sol.residuals.begin(), sol.residuals.end());

  {
    CsvBuilder csv("t,x,u,eta,chi");
    for (int k = 0; k <= sol.steps(); k += c.output.pde_time_stride) {
      for (int i = 0; i < grid.size(); ++i) {
        csv << sol.times[k] << grid.node(i) << sol.u(k, i) << sol.eta(k, i) << sol.chi(k, i);
        csv.end_row();
      }
    }
    out.write("pde_solution.csv", csv.str());
  }

  // Step halving: successive final-state differences, and oracle errors where available.
  std::optional<PMESolution> refined;
  nlohmann::json refinement = {{"n_steps", nlohmann::json::array()},
                               {"successive_l1", nlohmann::json::array()},
                               {"ratios", nlohmann::json::array()}};
  const auto oracle_final = oracle_solution(c, grid, c.t_final);
  std::vector<double> successive;
  std::optional<GridDensity> prev_final;
  for (int l = 0; l < c.diagnostics.refinement_levels; ++l) {
    PMEConfig lc = cfg;
    lc.n_steps = cfg.n_steps << l;
    PMESolution ls = l == 0 ? sol : evolve(u0, graph, lc);
    GridDensity fin = ls.density(ls.steps());
    refinement["n_steps"].push_back(lc.n_steps);
    if (oracle_final) refinement["oracle_l1"].push_back(l1_distance(fin, *oracle_final));
    if (prev_final) {
      successive.push_back(l1_distance(*prev_final, fin));
      refinement["successive_l1"].push_back(successive.back());
    }
    prev_final = std::move(fin);
    if (l == 1) refined = std::move(ls);
  }
  for (std::size_t k = 0; k + 1 < successive.size(); ++k) {
    refinement["ratios"].push_back(successive[k + 1] > 0.0 ? successive[k] / successive[k + 1] : 0.0);
  }
  if (oracle_final) {
    const auto& e = refinement["oracle_l1"];
    refinement["oracle_ratios"] = nlohmann::json::array();
    for (std::size_t k = 0; k + 1 < e.size(); ++k) {
      refinement["oracle_ratios"].push_back(e[k].get<double>() / e[k + 1].get<double>());
    }
  }
  out.write_json("refinement_report.json", refinement);
  res.metrics["refinement"] = refinement;

  // Invariants on the full PDE trajectory.
  ConservationTolerances tol;
  tol.mass = c.diagnostics.mass_tol;
  tol.positivity = c.diagnostics.positivity_tol;
  tol.linf = c.diagnostics.linf_tol;
  tol.kappa_fraction = c.diagnostics.kappa_fraction;
  const DiagnosticReport cons = conservation_report(sol, tol);
  for (const auto& chk : cons.checks) res.checks.push_back(chk);
  res.checks.push_back(selection_check(sol, graph, 1e-9));
  double bv = 0.0;
  for (int k = 0; k <= sol.steps(); ++k) {
    double tv = 0.0;
    for (int i = 1; i < grid.size(); ++i) tv += std::abs(sol.u(k, i) - sol.u(k, i - 1));
    bv = std::max(bv, tv);
  }
  res.metrics["bv_seminorm_max"] = bv;
  res.metrics["l2_space_time"] = cons.l2_space_time;
  res.metrics["kappa"] = cons.kappa;
  if (oracle_final) {
    const double err = l1_distance(sol.density(sol.steps()), *oracle_final);
    res.metrics["oracle_l1"] = err;
    if (!std::isnan(c.diagnostics.oracle_tol)) res.checks.push_back(upper_check("oracle_l1", err, c.diagnostics.oracle_tol));
  }

  Field2D a(sol.chi.rows(), sol.chi.cols());
  for (int k = 0; k < a.rows(); ++k) {
    for (int i = 0; i < a.cols(); ++i) a(k, i) = 0.5 * sol.chi(k, i) * sol.chi(k, i);
  }
  std::vector<GridDensity> timeline;
  for (int k = 0; k <= sol.steps(); ++k) timeline.push_back(sol.density(k));
  const auto residual = fokker_planck_residual(timeline, sol.times, a, hermite_test_family(grid, c.diagnostics.test_functions));
  res.metrics["fp_residual_max"] = *std::max_element(residual.begin(), residual.end());

  DiagnosticRows d;
  std::optional<SdeRun> run;
  if (c.sde.enabled) {
    const SDEConfig scfg = sde_config(c, grid);
    run = scfg.mode == SdeMode::Coupled ? simulate_coupled(phi, u0, scfg)
                                        : simulate_decoupled(CoefficientField::from_solution(sol), u0, scfg);
    for (const auto& w : run->warnings) res.warnings.push_back(w);
    for (const auto& s : run->snapshots) d.times.push_back(s.time);
  } else {
    for (int k = 0; k <= sol.steps(); k += c.output.pde_time_stride) d.times.push_back(sol.times[k]);
  }

  std::vector<SignedGridMeasure> diffs;
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    const double t = d.times[k];
    const GridDensity u = pde_at(sol, t);
    density_stats(d, u);
    d.residual.push_back(series_at(sol.times, residual, t));
    if (run) {
      const GridDensity& kde = *run->snapshots[k].kde;
      d.l1.push_back(l1_distance(u, kde));
      d.w1.push_back(wasserstein1(u, kde));
      diffs.push_back(SignedGridMeasure::from_density(u) - SignedGridMeasure::from_density(kde));
    } else {
      d.l1.push_back(std::numeric_limits<double>::quiet_NaN());
      d.w1.push_back(std::numeric_limits<double>::quiet_NaN());
      diffs.push_back(SignedGridMeasure::from_density(u) - SignedGridMeasure::from_density(pde_at(*refined, t)));
    }
  }
  res.checks.push_back(g_eps_check(c.diagnostics.eps_ladder, diffs, d.g_eps));
  res.metrics["g_eps_compares"] = run ? "pde_vs_particles" : "pde_vs_halved_step";
  out.write("diagnostics.csv", diagnostics_csv(d, c.diagnostics.eps_ladder));

  if (run) {
    const double coef_sup = phi.sup_bound() + (run->snapshots.empty() ? 0.0 : c.sde.epsilon_reg);
    const MomentReport moments = increment_moment_report(run->snapshots, default_lag_ladder(run->snapshots.size()),
                                                         coef_sup, c.diagnostics.moment_factor);
    res.checks.push_back(martingale_check(*run, coef_sup));
    res.checks.push_back(moment_check(moments));
    res.metrics["moment_fitted_constant"] = moments.fitted_constant;
    res.metrics["representation_l1"] = d.l1.back();
    res.metrics["representation_w1"] = d.w1.back();
    res.metrics["final_particle_variance"] = run->final().variance;
    res.metrics["max_outside_fraction"] = run->max_outside_fraction;
    if (!std::isnan(c.diagnostics.l1_tol)) res.checks.push_back(upper_check("representation_l1", d.l1.back(), c.diagnostics.l1_tol));
    if (!std::isnan(c.diagnostics.w1_tol)) res.checks.push_back(upper_check("representation_w1", d.w1.back(), c.diagnostics.w1_tol));
    out.write("particles.csv", particles_csv(*run, c.output.particle_stride));
    out.write("marginals.csv", marginals_csv(*run));
    out.write("moments.csv", moments_csv(moments));
  }
}

inline void run_counterexample_pipeline(const RunConfig& c, ArtifactWriter& out, RunOutcome& res) {
  const Grid1D grid(c.half_width, c.grid_n);
  const PhiSpec phi = build_phi(c.phi, 1.0);
  SDEConfig scfg = sde_config(c, grid);
  const CounterexampleOptions opt{c.es.dt_internal, c.es.max_resamples};
  const CounterexamplePair pair = engelbert_schmidt_pair(phi, scfg, opt);
  res.metrics["phi"] = phi.describe();
  res.metrics["resampled_paths"] = pair.resampled_paths;

  InvariantCheck trivial{"trivial_variance_zero", true, 0.0, 0.0, ""};
  for (const auto& s : pair.trivial.snapshots) trivial.value = std::max(trivial.value, s.variance);
  trivial.passed = trivial.value == 0.0;
  res.checks.push_back(trivial);

  const auto ci = variance_confidence(pair.nontrivial.final().positions);
  InvariantCheck nontrivial{"nontrivial_variance_ci_excludes_zero", ci.lo > 0.0, ci.lo, 0.0, ""};
  {
    std::ostringstream os;
    os << "variance " << ci.variance << ", 99% CI [" << ci.lo << ", " << ci.hi << "]";
    nontrivial.detail = os.str();
  }
  res.checks.push_back(nontrivial);
  res.metrics["nontrivial_variance"] = {{"estimate", ci.variance}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}};

  const PowerLawClock clock = PowerLawClock::from_phi(phi);
  const ClockPath qv_path = engelbert_schmidt_path(clock, c.sde.dt, c.t_final,
                                                   StreamId{c.seed, stream_tag::kCounterexample, 0},
                                                   {c.es.qv_dt_internal, c.es.max_resamples});
  const auto qv = quadratic_variation_check(clock, qv_path);
  res.checks.push_back(upper_check("qv_clock_identity", qv.clock_rel_error(), c.diagnostics.qv_tol,
                                   "A_t vs int Phi^2(M) ds on one path"));
  res.metrics["quadratic_variation"] = {{"realized", qv.realized},
                                        {"clock", qv.clock},
                                        {"integrated", qv.integrated},
                                        {"realized_rel_error", qv.realized_rel_error()}};

  const double coef_sup = phi.sup_bound();
  const MomentReport moments = increment_moment_report(
      pair.nontrivial.snapshots, default_lag_ladder(pair.nontrivial.snapshots.size()), coef_sup, c.diagnostics.moment_factor);
  res.checks.push_back(martingale_check(pair.nontrivial, coef_sup));
  res.checks.push_back(moment_check(moments));

  DiagnosticRows d;
  std::vector<GridDensity> timeline;
  std::vector<SignedGridMeasure> diffs;
  Field2D a(static_cast<int>(pair.nontrivial.snapshots.size()), grid.size());
  for (std::size_t k = 0; k < pair.nontrivial.snapshots.size(); ++k) {
    const auto& s = pair.nontrivial.snapshots[k];
    const auto& z = pair.trivial.snapshots[k];
    d.times.push_back(s.time);
    density_stats(d, *s.kde);
    d.l1.push_back(l1_distance(*s.kde, *z.kde));
    d.w1.push_back(wasserstein1(*s.kde, *z.kde));
    timeline.push_back(*s.kde);
    for (int i = 0; i < grid.size(); ++i) {
      const double f = clock.phi(grid.node(i));
      a(static_cast<int>(k), i) = 0.5 * f * f;
    }
    diffs.push_back(empirical_measure(z.positions, grid) - empirical_measure(s.positions, grid));
  }
  d.residual = fokker_planck_residual(timeline, d.times, a, hermite_test_family(grid, c.diagnostics.test_functions));
  res.checks.push_back(g_eps_check(c.diagnostics.eps_ladder, diffs, d.g_eps));
  nlohmann::json g_final = nlohmann::json::object();
  for (std::size_t e = 0; e < c.diagnostics.eps_ladder.size(); ++e) {
    g_final[format_number(c.diagnostics.eps_ladder[e])] = d.g_eps[e].back();
  }
  res.metrics["g_eps_final"] = g_final;
  res.metrics["g_eps_compares"] = "trivial_vs_nontrivial";
  out.write("diagnostics.csv", diagnostics_csv(d, c.diagnostics.eps_ladder));
  out.write("particles.csv", particles_csv(pair.nontrivial, c.output.particle_stride));
  out.write("particles_trivial.csv", particles_csv(pair.trivial, c.output.particle_stride));
  out.write("marginals.csv", marginals_csv(pair.nontrivial));
  out.write("marginals_trivial.csv", marginals_csv(pair.trivial));
  out.write("moments.csv", moments_csv(moments));
}

}  // namespace detail

/// Runs one scenario end to end and writes every artifact plus the manifest.
/// Exit code: 0 all checks pass, 1 an invariant failed, 2 invalid config, 3 runtime error.
inline RunOutcome run(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  RunOutcome res;
  res.out_dir = out_dir;
  ArtifactWriter out(out_dir);
  nlohmann::json manifest = {{"scenario", cfg.scenario}, {"seed", cfg.seed}, {"config", to_json(cfg)}};
  ConfigIssues issues;
  check_config(cfg, issues);
  res.warnings = issues.warnings;
  try {
    if (!issues.ok()) fail(ErrorKind::ConfigError, issues.errors.front());
    if (cfg.scenario == "engelbert_schmidt") {
      detail::run_counterexample_pipeline(cfg, out, res);
    } else {
      detail::run_pde_pipeline(cfg, out, res);
    }
    const bool ok = std::all_of(res.checks.begin(), res.checks.end(), [](const InvariantCheck& c) { return c.passed; });
    res.exit_code = ok ? kPass : kInvariantFailure;
  } catch (const Error& e) {
    res.error = e.what();
    res.exit_code = e.kind() == ErrorKind::ConfigError ? kConfigError : kRuntimeError;
    manifest["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    res.error = e.what();
    res.exit_code = kRuntimeError;
    manifest["error"] = {{"kind", "Internal"}, {"message", e.what()}};
  }

  nlohmann::json summary = {{"scenario", cfg.scenario},
                            {"seed", cfg.seed},
                            {"status", res.exit_code == kPass ? "pass" : res.exit_code == kInvariantFailure ? "fail" : "error"},
                            {"exit_code", res.exit_code}};
  summary["checks"] = nlohmann::json::array();
  for (const auto& c : res.checks) summary["checks"].push_back(detail::check_json(c));
  summary["warnings"] = res.warnings;
  summary["metrics"] = res.metrics;
  if (res.error) summary["error"] = *res.error;
  out.write_json("summary.json", summary);
  manifest["exit_code"] = res.exit_code;
  out.write_manifest(manifest);
  return res;
}

}  // namespace pmrep::app
