#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmrep/error.hpp"
#include "pmrep/monotone_graph.hpp"
#include "pmrep/phi.hpp"

namespace pmrep::app {

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"heat",          "barenblatt",        "heaviside_nondegenerate",
                                              "heaviside_degenerate", "coupled_particles", "engelbert_schmidt"};
  return names;
}

struct PhiConfig {
  std::string kind = "constant";  // constant | heaviside | power
  double value = 1.0;
  /// Heaviside jump location: absolute, or relative to ||u0||_inf. Exactly one is used.
  double threshold = std::numeric_limits<double>::quiet_NaN();
  double threshold_factor = std::numeric_limits<double>::quiet_NaN();
  double low = 0.0;
  double high = 1.0;
  double exponent = 0.5;
  double cap = 1.0;
  /// Added to the base map (Phi + epsilon).
  double epsilon = 0.0;
  /// Convention c1 in Phi(0); NaN keeps the liminf default.
  double zero_value = std::numeric_limits<double>::quiet_NaN();
};

struct InitialConfig {
  std::string kind = "gaussian";  // gaussian | barenblatt | uniform
  double mean = 0.0;
  double variance = 0.25;
  double t0 = 1.0;        // barenblatt start time
  double half_width = 1.0;  // uniform support
};

struct SdeSection {
  bool enabled = true;
  std::string mode = "decoupled";  // decoupled | coupled
  std::uint64_t n_particles = 10000;
  double dt = 1e-3;
  double epsilon_reg = 0.0;
  std::string bandwidth_rule = "silverman";  // silverman | fixed
  double bandwidth = 1.0;
  int refresh_every = 1;
  int snapshot_every = 100;
};

struct EsSection {
  double dt_internal = 1e-4;
  int max_resamples = 16;
  double qv_dt_internal = 1e-5;
};

struct DiagnosticsSection {
  std::vector<double> eps_ladder{0.1, 1.0, 10.0};
  int test_functions = 12;
  double kappa_fraction = 0.1;
  double mass_tol = 1e-6;
  double positivity_tol = 1e-12;
  double linf_tol = 1e-12;
  double moment_factor = 3.5;
  int refinement_levels = 3;
  /// Representation thresholds (particle KDE vs PDE); NaN reports without checking.
  double l1_tol = std::numeric_limits<double>::quiet_NaN();
  double w1_tol = std::numeric_limits<double>::quiet_NaN();
  /// Closed-form oracle l1 threshold where an oracle applies; NaN reports only.
  double oracle_tol = std::numeric_limits<double>::quiet_NaN();
  double qv_tol = 0.1;
};

struct OutputSection {
  std::string dir;
  int particle_stride = 1;
  int pde_time_stride = 1;
};

struct RunConfig {
  std::string scenario = "heat";
  std::uint64_t seed = 42;
  double half_width = 8.0;
  int grid_n = 512;
  double t_final = 1.0;
  int n_steps = 256;
  double gs_tol = 1e-12;
  int gs_max_sweeps = 100000;
  double chi_threshold = 1e-14;
  PhiConfig phi;
  InitialConfig initial;
  SdeSection sde;
  EsSection es;
  DiagnosticsSection diagnostics;
  OutputSection output;
};

struct ConfigIssues {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

namespace detail {

template <class T>
bool parse_value(const std::string& s, T& out) {
  if constexpr (std::is_same_v<T, std::string>) {
    out = s;
    return true;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
      out = true;
      return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
      out = false;
      return true;
    }
    return false;
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double x = 0.0;
      if (!parse_value(item, x)) return false;
      v.push_back(x);
    }
    out = v;
    return !v.empty();
  } else {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return false;
    const char* first = s.data() + b;
    const char* last = s.data() + e + 1;
    if (*first == '+') ++first;
    T v{};
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return false;
    out = v;
    return true;
  }
}

template <class T>
nlohmann::json to_json_value(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    if (std::isnan(v)) return nullptr;
    return v;
  } else {
    return v;
  }
}

template <class T>
const char* type_name() {
  if constexpr (std::is_same_v<T, std::string>) return "string";
  else if constexpr (std::is_same_v<T, bool>) return "bool";
  else if constexpr (std::is_same_v<T, std::vector<double>>) return "list of reals";
  else if constexpr (std::is_floating_point_v<T>) return "real";
  else if constexpr (std::is_unsigned_v<T>) return "nonnegative integer";
  else return "integer";
}

}  // namespace detail

/// One typed key of the config grammar.
struct ConfigKey {
  std::string path;  // section.key
  std::string type;
  std::function<bool(RunConfig&, const std::string&)> parse;
  std::function<nlohmann::json(const RunConfig&)> get;
};

template <class T, class Access>
ConfigKey make_key(std::string path, Access access) {
  return {std::move(path), detail::type_name<T>(),
          [access](RunConfig& c, const std::string& s) { return detail::parse_value<T>(s, access(c)); },
          [access](const RunConfig& c) { return detail::to_json_value<T>(access(const_cast<RunConfig&>(c))); }};
}

inline const std::vector<ConfigKey>& config_schema() {
  using C = RunConfig;
  static const std::vector<ConfigKey> keys{
      make_key<std::string>("run.scenario", [](C& c) -> auto& { return c.scenario; }),
      make_key<std::uint64_t>("run.seed", [](C& c) -> auto& { return c.seed; }),
      make_key<int>("grid.n", [](C& c) -> auto& { return c.grid_n; }),
      make_key<double>("grid.half_width", [](C& c) -> auto& { return c.half_width; }),
      make_key<double>("pde.t_final", [](C& c) -> auto& { return c.t_final; }),
      make_key<int>("pde.n_steps", [](C& c) -> auto& { return c.n_steps; }),
      make_key<double>("pde.gs_tol", [](C& c) -> auto& { return c.gs_tol; }),
      make_key<int>("pde.gs_max_sweeps", [](C& c) -> auto& { return c.gs_max_sweeps; }),
      make_key<double>("pde.chi_threshold", [](C& c) -> auto& { return c.chi_threshold; }),
      make_key<std::string>("phi.kind", [](C& c) -> auto& { return c.phi.kind; }),
      make_key<double>("phi.value", [](C& c) -> auto& { return c.phi.value; }),
      make_key<double>("phi.threshold", [](C& c) -> auto& { return c.phi.threshold; }),
      make_key<double>("phi.threshold_factor", [](C& c) -> auto& { return c.phi.threshold_factor; }),
      make_key<double>("phi.low", [](C& c) -> auto& { return c.phi.low; }),
      make_key<double>("phi.high", [](C& c) -> auto& { return c.phi.high; }),
      make_key<double>("phi.exponent", [](C& c) -> auto& { return c.phi.exponent; }),
      make_key<double>("phi.cap", [](C& c) -> auto& { return c.phi.cap; }),
      make_key<double>("phi.epsilon", [](C& c) -> auto& { return c.phi.epsilon; }),
      make_key<double>("phi.zero_value", [](C& c) -> auto& { return c.phi.zero_value; }),
      make_key<std::string>("initial.kind", [](C& c) -> auto& { return c.initial.kind; }),
      make_key<double>("initial.mean", [](C& c) -> auto& { return c.initial.mean; }),
      make_key<double>("initial.variance", [](C& c) -> auto& { return c.initial.variance; }),
      make_key<double>("initial.t0", [](C& c) -> auto& { return c.initial.t0; }),
      make_key<double>("initial.half_width", [](C& c) -> auto& { return c.initial.half_width; }),
      make_key<bool>("sde.enabled", [](C& c) -> auto& { return c.sde.enabled; }),
      make_key<std::string>("sde.mode", [](C& c) -> auto& { return c.sde.mode; }),
      make_key<std::uint64_t>("sde.n_particles", [](C& c) -> auto& { return c.sde.n_particles; }),
      make_key<double>("sde.dt", [](C& c) -> auto& { return c.sde.dt; }),
      make_key<double>("sde.epsilon_reg", [](C& c) -> auto& { return c.sde.epsilon_reg; }),
      make_key<std::string>("sde.bandwidth_rule", [](C& c) -> auto& { return c.sde.bandwidth_rule; }),
      make_key<double>("sde.bandwidth", [](C& c) -> auto& { return c.sde.bandwidth; }),
      make_key<int>("sde.refresh_every", [](C& c) -> auto& { return c.sde.refresh_every; }),
      make_key<int>("sde.snapshot_every", [](C& c) -> auto& { return c.sde.snapshot_every; }),
      make_key<double>("es.dt_internal", [](C& c) -> auto& { return c.es.dt_internal; }),
      make_key<int>("es.max_resamples", [](C& c) -> auto& { return c.es.max_resamples; }),
      make_key<double>("es.qv_dt_internal", [](C& c) -> auto& { return c.es.qv_dt_internal; }),
      make_key<std::vector<double>>("diagnostics.eps_ladder", [](C& c) -> auto& { return c.diagnostics.eps_ladder; }),
      make_key<int>("diagnostics.test_functions", [](C& c) -> auto& { return c.diagnostics.test_functions; }),
      make_key<double>("diagnostics.kappa_fraction", [](C& c) -> auto& { return c.diagnostics.kappa_fraction; }),
      make_key<double>("diagnostics.mass_tol", [](C& c) -> auto& { return c.diagnostics.mass_tol; }),
      make_key<double>("diagnostics.positivity_tol", [](C& c) -> auto& { return c.diagnostics.positivity_tol; }),
      make_key<double>("diagnostics.linf_tol", [](C& c) -> auto& { return c.diagnostics.linf_tol; }),
      make_key<double>("diagnostics.moment_factor", [](C& c) -> auto& { return c.diagnostics.moment_factor; }),
      make_key<int>("diagnostics.refinement_levels", [](C& c) -> auto& { return c.diagnostics.refinement_levels; }),
      make_key<double>("diagnostics.l1_tol", [](C& c) -> auto& { return c.diagnostics.l1_tol; }),
      make_key<double>("diagnostics.w1_tol", [](C& c) -> auto& { return c.diagnostics.w1_tol; }),
      make_key<double>("diagnostics.oracle_tol", [](C& c) -> auto& { return c.diagnostics.oracle_tol; }),
      make_key<double>("diagnostics.qv_tol", [](C& c) -> auto& { return c.diagnostics.qv_tol; }),
      make_key<std::string>("output.dir", [](C& c) -> auto& { return c.output.dir; }),
      make_key<int>("output.particle_stride", [](C& c) -> auto& { return c.output.particle_stride; }),
      make_key<int>("output.pde_time_stride", [](C& c) -> auto& { return c.output.pde_time_stride; }),
  };
  return keys;
}

inline const ConfigKey* find_key(const std::string& path) {
  for (const auto& k : config_schema()) {
    if (k.path == path) return &k;
  }
  return nullptr;
}

/// Built-in parameters of each registered scenario.
inline RunConfig scenario_defaults(const std::string& name) {
  RunConfig c;
  c.scenario = name;
  if (name == "heat") {
    c.grid_n = 1024;
    c.half_width = 12.0;
    c.phi.kind = "constant";
    c.diagnostics.oracle_tol = 0.01;
  } else if (name == "barenblatt") {
    c.grid_n = 400;
    c.half_width = 5.0;
    c.n_steps = 100;
    c.phi.kind = "power";
    c.phi.exponent = 0.5;
    c.phi.cap = 1.0;
    c.initial.kind = "barenblatt";
    c.initial.t0 = 1.0;
    c.diagnostics.oracle_tol = 0.02;
  } else if (name == "heaviside_nondegenerate") {
    c.seed = 7;
    c.phi.kind = "heaviside";
    c.phi.threshold_factor = 0.8;
    c.phi.epsilon = 0.5;
    c.sde.n_particles = 100000;
    c.diagnostics.l1_tol = 0.05;
    c.diagnostics.w1_tol = 0.03;
  } else if (name == "heaviside_degenerate") {
    c.phi.kind = "heaviside";
    c.phi.threshold_factor = 0.8;
  } else if (name == "coupled_particles") {
    c.phi.kind = "heaviside";
    c.phi.threshold_factor = 0.8;
    c.sde.mode = "coupled";
    c.sde.epsilon_reg = 0.5;
  } else if (name == "engelbert_schmidt") {
    c.seed = 1;
    c.phi.kind = "power";
    c.phi.exponent = 0.25;
    c.phi.cap = 1.0;
  } else {
    fail(ErrorKind::ScenarioUnknown, "unknown scenario '" + name + "'");
  }
  return c;
}

inline bool is_known_scenario(const std::string& name) {
  for (const auto& s : scenario_names()) {
    if (s == name) return true;
  }
  return false;
}

/// Phi for a resolved config; Heaviside thresholds given as a factor need ||u0||_inf.
inline PhiSpec build_phi(const PhiConfig& p, double u0_sup) {
  PhiSpec base = PhiSpec::constant(p.value);
  if (p.kind == "heaviside") {
    const double at = std::isnan(p.threshold) ? p.threshold_factor * u0_sup : p.threshold;
    base = PhiSpec::heaviside(at, p.low, p.high);
  } else if (p.kind == "power") {
    base = PhiSpec::power(p.exponent, p.cap);
  } else if (p.kind != "constant") {
    fail(ErrorKind::ConfigError, "phi.kind: unknown kind '" + p.kind + "'");
  }
  PhiSpec phi = p.epsilon > 0.0 ? PhiSpec::regularized(base, p.epsilon) : base;
  if (!std::isnan(p.zero_value)) phi.with_zero_value(p.zero_value);
  return phi;
}

/// Type and invariant checks; every problem is reported, never just the first.
inline void check_config(const RunConfig& c, ConfigIssues& issues) {
  auto& err = issues.errors;
  const auto need = [&err](bool ok, const std::string& key, const std::string& what) {
    if (!ok) err.push_back(key + ": " + what);
  };
  need(is_known_scenario(c.scenario), "run.scenario", "unknown scenario '" + c.scenario + "'");
  need(c.grid_n >= 8, "grid.n", "must be at least 8");
  need(c.half_width > 0.0, "grid.half_width", "must be positive");
  need(c.t_final > 0.0, "pde.t_final", "must be positive");
  need(c.n_steps >= 1, "pde.n_steps", "must be at least 1");
  need(c.gs_tol > 0.0, "pde.gs_tol", "must be positive");
  need(c.gs_max_sweeps >= 2, "pde.gs_max_sweeps", "must be at least 2");
  need(c.chi_threshold >= 0.0, "pde.chi_threshold", "must be nonnegative");

  const auto& p = c.phi;
  need(p.kind == "constant" || p.kind == "heaviside" || p.kind == "power", "phi.kind",
       "must be constant, heaviside or power");
  if (p.kind == "constant") need(p.value >= 0.0, "phi.value", "must be nonnegative");
  if (p.kind == "heaviside") {
    need(std::isnan(p.threshold) != std::isnan(p.threshold_factor), "phi.threshold",
         "set exactly one of phi.threshold and phi.threshold_factor");
    if (!std::isnan(p.threshold)) need(p.threshold > 0.0, "phi.threshold", "must be positive");
    if (!std::isnan(p.threshold_factor)) need(p.threshold_factor > 0.0, "phi.threshold_factor", "must be positive");
    need(p.low >= 0.0 && p.high >= 0.0, "phi.low", "Phi values must be nonnegative");
  }
  if (p.kind == "power") {
    need(p.exponent > 0.0, "phi.exponent", "must be positive");
    need(p.cap > 0.0, "phi.cap", "must be positive");
  }
  need(p.epsilon >= 0.0, "phi.epsilon", "must be nonnegative");
  if (!std::isnan(p.zero_value)) need(p.zero_value >= 0.0, "phi.zero_value", "must be nonnegative");

  const auto& i = c.initial;
  need(i.kind == "gaussian" || i.kind == "barenblatt" || i.kind == "uniform", "initial.kind",
       "must be gaussian, barenblatt or uniform");
  if (i.kind == "gaussian") need(i.variance > 0.0, "initial.variance", "must be positive");
  if (i.kind == "barenblatt") need(i.t0 > 0.0, "initial.t0", "must be positive");
  if (i.kind == "uniform") need(i.half_width > 0.0, "initial.half_width", "must be positive");

  const auto& s = c.sde;
  need(s.mode == "decoupled" || s.mode == "coupled", "sde.mode", "must be decoupled or coupled");
  need(s.n_particles >= 1, "sde.n_particles", "must be at least 1");
  need(s.dt > 0.0, "sde.dt", "must be positive");
  if (s.dt > 0.0 && c.t_final > 0.0) {
    const double steps = std::round(c.t_final / s.dt);
    need(steps >= 1.0 && std::abs(steps * s.dt - c.t_final) <= 1e-9 * c.t_final, "sde.dt",
         "pde.t_final must be an integer multiple of sde.dt");
  }
  need(s.epsilon_reg >= 0.0, "sde.epsilon_reg", "must be nonnegative");
  need(s.bandwidth_rule == "silverman" || s.bandwidth_rule == "fixed", "sde.bandwidth_rule",
       "must be silverman or fixed");
  need(s.bandwidth > 0.0, "sde.bandwidth", "must be positive");
  need(s.refresh_every >= 1, "sde.refresh_every", "must be at least 1");
  need(s.snapshot_every >= 1, "sde.snapshot_every", "must be at least 1");

  need(c.es.dt_internal > 0.0, "es.dt_internal", "must be positive");
  need(c.es.qv_dt_internal > 0.0, "es.qv_dt_internal", "must be positive");
  need(c.es.max_resamples >= 0, "es.max_resamples", "must be nonnegative");

  const auto& d = c.diagnostics;
  bool ladder_ok = !d.eps_ladder.empty();
  for (double e : d.eps_ladder) ladder_ok = ladder_ok && e > 0.0;
  need(ladder_ok, "diagnostics.eps_ladder", "needs at least one positive epsilon");
  need(d.test_functions >= 1, "diagnostics.test_functions", "must be at least 1");
  need(d.kappa_fraction >= 0.0 && d.kappa_fraction < 1.0, "diagnostics.kappa_fraction", "must lie in [0, 1)");
  need(d.mass_tol > 0.0, "diagnostics.mass_tol", "must be positive");
  need(d.moment_factor > 0.0, "diagnostics.moment_factor", "must be positive");
  need(d.refinement_levels >= 2, "diagnostics.refinement_levels", "must be at least 2");
  need(c.output.particle_stride >= 1, "output.particle_stride", "must be at least 1");
  need(c.output.pde_time_stride >= 1, "output.pde_time_stride", "must be at least 1");

  if (c.scenario == "engelbert_schmidt") {
    need(p.kind == "power" && p.exponent < 0.5 && p.epsilon == 0.0, "phi.kind",
         "engelbert_schmidt needs phi.kind = power with exponent < 1/2 and no epsilon");
  }
  if (!err.empty()) return;

  // Structural check of Phi on a representative data scale.
  try {
    const PhiSpec phi = build_phi(p, 1.0);
    if (c.scenario != "engelbert_schmidt") from_phi(phi);
    if (c.sde.enabled && s.mode == "coupled" && !phi.non_degenerate() && s.epsilon_reg == 0.0) {
      issues.warnings.push_back("DegenerateWithoutRegularization: coupled mode with degenerate Phi and sde.epsilon_reg = 0");
    }
  } catch (const Error& e) {
    err.push_back(std::string("phi: ") + e.what());
  }
}

/// (key path, raw value) pairs applied on top of the file, e.g. from CLI flags.
using Overrides = std::vector<std::pair<std::string, std::string>>;

inline void apply_value(RunConfig& c, const std::string& path, const std::string& raw, const std::string& origin,
                        ConfigIssues& issues) {
  const ConfigKey* key = find_key(path);
  if (!key) {
    issues.errors.push_back(origin + path + ": unknown key");
    return;
  }
  if (!key->parse(c, raw)) issues.errors.push_back(origin + path + ": expected " + key->type + ", got '" + raw + "'");
}

/// Scenario defaults, then the file (if any), then the overrides.
/// The scenario is taken from the overrides first, then from the file.
inline RunConfig resolve_config(const std::string& path, const Overrides& overrides, ConfigIssues& issues) {
  boost::property_tree::ptree tree;
  if (!path.empty()) {
    try {
      boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      issues.errors.push_back(std::string("config: ") + e.what());
      return scenario_defaults("heat");
    }
  }
  std::string scenario = tree.get<std::string>("run.scenario", "heat");
  for (const auto& [k, v] : overrides) {
    if (k == "run.scenario") scenario = v;
  }
  if (!is_known_scenario(scenario)) {
    issues.errors.push_back("run.scenario: unknown scenario '" + scenario + "'");
    return scenario_defaults("heat");
  }
  RunConfig c = scenario_defaults(scenario);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      issues.errors.push_back(section + ": key outside any section");
      continue;
    }
    for (const auto& [key, value] : body) apply_value(c, section + "." + key, value.data(), "", issues);
  }
  for (const auto& [k, v] : overrides) apply_value(c, k, v, "override ", issues);
  check_config(c, issues);
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_schema()) {
    const auto dot = k.path.find('.');
    j[k.path.substr(0, dot)][k.path.substr(dot + 1)] = k.get(c);
  }
  return j;
}

/// The resolved config in the file grammar, unset optional keys commented out.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : config_schema()) {
    const auto dot = k.path.find('.');
    const std::string sec = k.path.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    const auto v = k.get(c);
    std::string text;
    if (v.is_null()) {
      os << "; " << k.path.substr(dot + 1) << " =\n";
      continue;
    }
    if (v.is_string()) text = v.get<std::string>();
    else if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) text += (i ? "," : "") + v[i].dump();
    } else text = v.dump();
    os << k.path.substr(dot + 1) << " = " << text << "\n";
  }
  return os.str();
}

}  // namespace pmrep::app
