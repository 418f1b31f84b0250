#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pmrep/app/runner.hpp"

namespace {

struct Options {
  std::string scenario, config, out_dir;
  pmrep::app::Overrides overrides;
};

void add_run_flags(CLI::App& cmd, Options& o) {
  cmd.add_option("--scenario", o.scenario, "Scenario name");
  cmd.add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  const auto flag = [&](const char* name, const char* key, const char* help) {
    cmd.add_option_function<std::string>(name, [&o, key](const std::string& v) { o.overrides.emplace_back(key, v); },
                                         help);
  };
  flag("--seed", "run.seed", "Master seed");
  flag("--grid-n", "grid.n", "Number of grid cells");
  flag("--domain-l", "grid.half_width", "Domain half width L");
  flag("--t-final", "pde.t_final", "Final time");
  flag("--n-steps", "pde.n_steps", "Implicit steps");
  flag("--n-particles", "sde.n_particles", "Particle count");
  flag("--dt", "sde.dt", "Euler step");
  flag("--epsilon-reg", "sde.epsilon_reg", "Coefficient regularisation");
  flag("--kde-bandwidth", "sde.bandwidth", "Bandwidth scale or fixed value");
}

pmrep::app::RunConfig resolve(Options& o, pmrep::app::ConfigIssues& issues) {
  if (!o.scenario.empty()) o.overrides.insert(o.overrides.begin(), {"run.scenario", o.scenario});
  return pmrep::app::resolve_config(o.config, o.overrides, issues);
}

void print_issues(const pmrep::app::ConfigIssues& issues) {
  for (const auto& w : issues.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& e : issues.errors) std::cerr << "error: " << e << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Porous medium equation solver with McKean-Vlasov particle representation"};
  app.require_subcommand(1);

  Options run_opts, val_opts;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write artifacts");
  add_run_flags(*run_cmd, run_opts);
  run_cmd->add_option("--out-dir", run_opts.out_dir, "Output directory");
  auto* val_cmd = app.add_subcommand("validate", "Resolve and check a configuration without running");
  add_run_flags(*val_cmd, val_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pmrep::app::kConfigError;
  }

  if (*val_cmd) {
    pmrep::app::ConfigIssues issues;
    const auto cfg = resolve(val_opts, issues);
    print_issues(issues);
    if (!issues.ok()) return pmrep::app::kConfigError;
    std::cout << pmrep::app::to_ini(cfg);
    return pmrep::app::kPass;
  }

  pmrep::app::ConfigIssues issues;
  const auto cfg = resolve(run_opts, issues);
  if (!issues.ok()) {
    print_issues(issues);
    return pmrep::app::kConfigError;
  }

  const auto dir = pmrep::app::resolve_out_dir(run_opts.out_dir, cfg);
  pmrep::app::RunOutcome res;
  try {
    res = pmrep::app::run(cfg, dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pmrep::app::kRuntimeError;
  }
  for (const auto& c : res.checks) {
    std::printf("%-40s %s  value=%.6g  threshold=%.6g  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.value,
                c.threshold, c.detail.c_str());
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  if (res.error) std::cerr << "error: " << *res.error << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return res.exit_code;
}
