#pragma once

// Scenario definitions, configuration files and output emission for the
// four closed-loop experiments: sequential reaching, a moving target,
// reaching between obstacles and grasping.

#include "cosserat/controller.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cosserat {

enum class Scenario { reach_multi, reach_moving, reach_obstacles, grasp };
enum class Profile { desk, paper };

std::string to_string(Scenario scenario);
std::string to_string(Profile profile);
Scenario parse_scenario(const std::string& name);
Profile parse_profile(const std::string& name);

struct ScenarioConfig {
  Scenario scenario = Scenario::reach_multi;
  Profile profile = Profile::desk;
  RodParameters rod;
  SimConfig sim;
  SolverConfig solver;
  ControllerConfig controller;

  std::vector<Vec2> targets;           // visited in order; one for the moving and obstacle tasks
  Vec2 target_velocity = Vec2::Zero(); // m/s, moving target only
  double mu_tip = 1.0e3;
  std::vector<Obstacle> obstacles;
  std::optional<GraspObject> grasp_object;
  // mu_grasp grows geometrically from ramp_start to the object weight over
  // ramp_time; the solver cannot reach the wrapped shape at full weight from
  // the straight rod.
  double grasp_ramp_start = 10.0;
  double grasp_ramp_time = 1.0;  // s

  std::string output_prefix;  // defaults to the scenario name
  unsigned seed = 0;          // reserved; runs are deterministic

  // Every parameter at its default for the scenario and profile.
  static ScenarioConfig defaults(Scenario scenario, Profile profile);

  // Throws ConfigError with a diagnostic naming the offending key.
  void validate() const;

  std::string prefix() const;
  bool online() const { return scenario != Scenario::reach_multi; }
};

// Flat key/value text: `key = value` lines, `#` or `;` comments, and
// optional `[section]` headers that prefix the keys of the following lines
// with `section.`. Unknown keys are errors. The profile given here takes
// precedence over a `profile` key in the file.
ScenarioConfig parse_config(std::istream& in, std::optional<Profile> profile = std::nullopt);
ScenarioConfig load_config(const std::filesystem::path& path,
                           std::optional<Profile> profile = std::nullopt);

// Task in force at time t.
TaskSpec task_at(const ScenarioConfig& config, double t);
// Tasks solved in sequence by the offline pipeline.
std::vector<TaskSpec> task_sequence(const ScenarioConfig& config);

// Normalised by L0. Tip to target for reaching; for grasping the
// mu_grasp-weighted mean over the nodes of the gap between the rod surface
// and the object boundary, | |r - c| - (D_object + phi(s)) / 2 |.
std::vector<double> distance_metric(const Trajectory& trajectory, const ScenarioConfig& config);
double grasp_gap(const Frame& frame, const GraspObject& object, const RodGeometry& geometry);

struct RunReport {
  std::string scenario;
  std::string profile;
  bool solver_converged = false;
  std::vector<bool> solves_converged;  // offline: one per target
  double final_distance = 0.0;         // m
  double min_obstacle_clearance = 0.0; // m, rod surface to obstacle surface, clipped at 0
  double max_penetration = 0.0;        // m
  double static_max_violation = 0.0;   // max_s Psi_j of the final target shape, m^2
  std::vector<double> switch_times;
  int lyapunov_violations = 0;
  int substeps = 1;
  bool settled = false;
  double final_time = 0.0;
  double wall_clock = 0.0;  // s; reported on stdout only, never written to files
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

struct RunResult {
  RunReport report;
  Trajectory trajectory;
  std::vector<double> distance;
};

RunResult run_scenario(const ScenarioConfig& config);

// Writes <prefix>_trajectory.csv, <prefix>_diagnostics.csv and
// <prefix>_summary.txt into the directory and records the paths.
void emit_outputs(RunResult& result, const ScenarioConfig& config,
                  const std::filesystem::path& directory);

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, int elements);
void write_diagnostics_csv(std::ostream& out, const Trajectory& trajectory,
                           const std::vector<double>& distance);
void write_summary(std::ostream& out, const RunReport& report);

// Solver iteration traces for every static task of the scenario, one file
// per task: <prefix>_sweep_trace.csv, or _sweep_trace_<i>.csv when there are
// several. Returns the paths.
std::vector<std::filesystem::path> write_sweep_traces(const ScenarioConfig& config,
                                                      const std::filesystem::path& directory);

}  // namespace cosserat
