#include "cosserat/errors.hpp"
#include "cosserat/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_divergence = 3,
  exit_instability = 4,
};

struct Options {
  std::string config;
  std::string out_dir = ".";
  std::string profile;
  bool quiet = false;
};

cosserat::ScenarioConfig load(const Options& options) {
  std::optional<cosserat::Profile> profile;
  if (!options.profile.empty()) profile = cosserat::parse_profile(options.profile);
  return cosserat::load_config(options.config, profile);
}

int run(const Options& options) {
  const auto config = load(options);
  if (!options.quiet) {
    std::cout << "running " << cosserat::to_string(config.scenario) << " ("
              << cosserat::to_string(config.profile) << ", N = " << config.rod.elements
              << ", dt = " << config.sim.dt << " s, " << config.sim.duration << " s)\n"
              << std::flush;
  }
  auto result = cosserat::run_scenario(config);
  cosserat::emit_outputs(result, config, options.out_dir);
  if (!options.quiet) {
    cosserat::write_summary(std::cout, result.report);
    std::printf("wall_clock = %.3f s\n", result.report.wall_clock);
  }
  return exit_ok;
}

int validate(const Options& options) {
  const auto config = load(options);
  if (!options.quiet) {
    std::cout << "ok: " << cosserat::to_string(config.scenario) << " ("
              << cosserat::to_string(config.profile) << ")\n";
  }
  return exit_ok;
}

int sweep_trace(const Options& options) {
  const auto config = load(options);
  const auto paths = cosserat::write_sweep_traces(config, options.out_dir);
  if (!options.quiet) {
    for (const auto& path : paths) std::cout << path.string() << '\n';
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar Cosserat rod shape control: scenario runner"};
  app.require_subcommand(1);

  Options options;
  app.add_option("--out-dir", options.out_dir, "Directory for emitted files")->capture_default_str();
  app.add_option("--profile", options.profile, "Parameter profile overriding the config")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_flag("--quiet", options.quiet, "Suppress progress and summary output");

  int (*action)(const Options&) = nullptr;
  auto add = [&](const char* name, const char* help, int (*handler)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", options.config, "Scenario configuration file")->required();
    sub->callback([&action, handler] { action = handler; });
  };
  add("run", "Run a scenario and write trajectory, diagnostics and summary files", run);
  add("validate", "Parse and validate a configuration without running it", validate);
  add("sweep-trace", "Write the solver iteration traces of a scenario's static tasks", sweep_trace);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    return action(options);
  } catch (const cosserat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const cosserat::SolverDivergence& e) {
    std::cerr << "solver divergence: " << e.what() << '\n';
    return exit_divergence;
  } catch (const cosserat::SimulationInstability& e) {
    std::cerr << "simulation instability: " << e.what() << '\n';
    return exit_instability;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_failure;
  }
}
