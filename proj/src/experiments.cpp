#include "cosserat/experiments.hpp"

#include "cosserat/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace cosserat {

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::reach_multi: return "reach_multi";
    case Scenario::reach_moving: return "reach_moving";
    case Scenario::reach_obstacles: return "reach_obstacles";
    case Scenario::grasp: return "grasp";
  }
  return "unknown";
}

std::string to_string(Profile profile) { return profile == Profile::desk ? "desk" : "paper"; }

Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::reach_multi, Scenario::reach_moving, Scenario::reach_obstacles,
                     Scenario::grasp}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown scenario '" + name +
                    "' (expected reach_multi, reach_moving, reach_obstacles or grasp)");
}

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::desk;
  if (name == "paper") return Profile::paper;
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

ScenarioConfig ScenarioConfig::defaults(Scenario scenario, Profile profile) {
  ScenarioConfig c;
  c.scenario = scenario;
  c.profile = profile;
  if (profile == Profile::desk) {
    c.rod.elements = 50;
    c.sim.dt = 2.0e-5;
    c.controller.control_steps = 10;
  } else {
    c.rod.elements = 100;
    c.sim.dt = 1.0e-5;
    c.controller.control_steps = 20;
  }
  const Obstacle sphere{{0.0, 0.0}, 0.08, 1.0e5};
  switch (scenario) {
    case Scenario::reach_multi:
      c.targets = {{0.09, 0.09}, {0.0, 0.02}};
      c.sim.duration = 25.0;
      break;
    case Scenario::reach_moving:
      c.targets = {{0.12, 0.09}};
      c.target_velocity = {-0.01, 0.0};
      c.sim.duration = 12.0;
      break;
    case Scenario::reach_obstacles:
      c.targets = {{0.09, 0.09}};
      c.obstacles = {sphere, sphere};
      c.obstacles[0].center = {0.054, 0.06};
      c.obstacles[1].center = {0.154, 0.06};
      c.sim.duration = 6.0;
      break;
    case Scenario::grasp:
      c.mu_tip = 0.0;
      c.grasp_object = GraspObject{{0.06, 0.03}, 0.04, 1.0e3, 0.4};
      c.sim.duration = 6.0;
      break;
  }
  return c;
}

std::string ScenarioConfig::prefix() const {
  return output_prefix.empty() ? to_string(scenario) : output_prefix;
}

void ScenarioConfig::validate() const {
  try {
    RodGeometry{rod};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("rod: ") + e.what());
  }
  sim.validate();
  solver.validate();
  controller.validate();
  if (!(sim.duration > 0.0)) throw ConfigError("sim.duration must be positive");
  if (!(mu_tip >= 0.0)) throw ConfigError("task.mu_tip must be non-negative");
  for (const auto& o : obstacles) {
    if (!(o.diameter > 0.0)) throw ConfigError("task.obstacles: diameters must be positive");
    if (!(o.weight > 0.0)) throw ConfigError("task.obstacle_weight must be positive");
  }
  const bool moving = target_velocity.squaredNorm() > 0.0;
  switch (scenario) {
    case Scenario::reach_multi:
      if (targets.empty()) throw ConfigError("reach_multi needs at least one entry in task.targets");
      break;
    case Scenario::reach_moving:
    case Scenario::reach_obstacles:
      if (targets.size() != 1) {
        throw ConfigError(to_string(scenario) + " needs exactly one entry in task.targets");
      }
      break;
    case Scenario::grasp:
      if (!grasp_object) throw ConfigError("grasp needs task.grasp_object");
      if (mu_tip != 0.0) {
        throw ConfigError("grasp requires task.mu_tip = 0: the tip and grasp objectives are exclusive");
      }
      if (!targets.empty()) throw ConfigError("grasp does not take task.targets");
      if (!(grasp_object->diameter > 0.0)) throw ConfigError("task.grasp_object: diameter must be positive");
      if (!(grasp_object->weight > 0.0)) throw ConfigError("task.grasp_weight must be positive");
      if (!(grasp_object->activation_fraction >= 0.0 && grasp_object->activation_fraction < 1.0)) {
        throw ConfigError("task.activation_fraction must lie in [0, 1)");
      }
      if (!(grasp_ramp_start > 0.0 && grasp_ramp_start <= grasp_object->weight)) {
        throw ConfigError("task.grasp_ramp_start must lie in (0, task.grasp_weight]");
      }
      if (!(grasp_ramp_time >= 0.0)) throw ConfigError("task.grasp_ramp_time must be non-negative");
      break;
  }
  if (scenario != Scenario::grasp && !(mu_tip > 0.0)) {
    throw ConfigError("reaching requires task.mu_tip > 0");
  }
  if (scenario != Scenario::grasp && grasp_object) {
    throw ConfigError("task.grasp_object is only valid for the grasp scenario");
  }
  if (moving && scenario != Scenario::reach_moving) {
    throw ConfigError("task.target_velocity is only valid for reach_moving");
  }
  if (scenario == Scenario::reach_obstacles && obstacles.empty()) {
    throw ConfigError("reach_obstacles needs task.obstacles");
  }
}

namespace {

using Entries = std::map<std::string, std::string>;

double to_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return value;
}

int to_int(const std::string& key, const std::string& text) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
  return value;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

// "a b; c d" -> rows of `width` numbers. An empty value gives no rows.
std::vector<std::vector<double>> to_rows(const std::string& key, const std::string& text,
                                         std::size_t width) {
  std::vector<std::vector<double>> rows;
  std::stringstream all(text);
  std::string chunk;
  while (std::getline(all, chunk, ';')) {
    std::stringstream fields(chunk);
    std::vector<double> row;
    std::string field;
    while (fields >> field) row.push_back(to_double(key, field));
    if (row.empty()) continue;
    if (row.size() != width) {
      throw ConfigError(key + ": each entry needs " + std::to_string(width) + " numbers");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Entries read_entries(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  Entries entries;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      entries[name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) {
      const std::string full = name + "." + key;
      if (entries.count(full)) throw ConfigError("duplicate key " + full);
      entries[full] = leaf.data();
    }
  }
  return entries;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const std::string& key, std::function<double&(ScenarioConfig&)> field) {
      t[key] = [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
        field(c) = to_double(k, v);
      };
    };
    auto integer = [&t](const std::string& key, std::function<int&(ScenarioConfig&)> field) {
      t[key] = [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
        field(c) = to_int(k, v);
      };
    };
    auto flag = [&t](const std::string& key, std::function<bool&(ScenarioConfig&)> field) {
      t[key] = [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
        field(c) = to_bool(k, v);
      };
    };

    real("rod.length", [](ScenarioConfig& c) -> double& { return c.rod.length; });
    real("rod.diameter_base", [](ScenarioConfig& c) -> double& { return c.rod.diameter_base; });
    real("rod.diameter_tip", [](ScenarioConfig& c) -> double& { return c.rod.diameter_tip; });
    real("rod.youngs_modulus", [](ScenarioConfig& c) -> double& { return c.rod.youngs_modulus; });
    real("rod.shear_modulus", [](ScenarioConfig& c) -> double& { return c.rod.shear_modulus; });
    real("rod.density", [](ScenarioConfig& c) -> double& { return c.rod.density; });
    integer("rod.elements", [](ScenarioConfig& c) -> int& { return c.rod.elements; });

    real("sim.dt", [](ScenarioConfig& c) -> double& { return c.sim.dt; });
    real("sim.duration", [](ScenarioConfig& c) -> double& { return c.sim.duration; });
    real("sim.gamma", [](ScenarioConfig& c) -> double& { return c.sim.gamma; });
    real("sim.contact_stiffness", [](ScenarioConfig& c) -> double& { return c.sim.contact_stiffness; });
    real("sim.max_kinetic_energy", [](ScenarioConfig& c) -> double& { return c.sim.max_kinetic_energy; });
    real("sim.max_phase_step", [](ScenarioConfig& c) -> double& { return c.sim.max_phase_step; });

    real("solver.learning_rate", [](ScenarioConfig& c) -> double& { return c.solver.learning_rate; });
    integer("solver.max_iter", [](ScenarioConfig& c) -> int& { return c.solver.max_iter; });
    real("solver.grad_tol", [](ScenarioConfig& c) -> double& { return c.solver.grad_tol; });
    flag("solver.backtracking", [](ScenarioConfig& c) -> bool& { return c.solver.backtracking; });
    integer("solver.max_backtracks", [](ScenarioConfig& c) -> int& { return c.solver.max_backtracks; });
    real("solver.divergence_factor", [](ScenarioConfig& c) -> double& { return c.solver.divergence_factor; });
    real("solver.kink_smoothing", [](ScenarioConfig& c) -> double& { return c.solver.kink_smoothing; });
    integer("solver.metric_refresh", [](ScenarioConfig& c) -> int& { return c.solver.metric_refresh; });
    t["solver.scheme"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      if (v == "midpoint") c.solver.scheme = SpatialScheme::midpoint;
      else if (v == "euler") c.solver.scheme = SpatialScheme::euler;
      else throw ConfigError(k + ": expected midpoint or euler");
    };
    t["solver.metric"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      if (v == "newton") c.solver.metric = StepMetric::newton;
      else if (v == "gradient") c.solver.metric = StepMetric::gradient;
      else throw ConfigError(k + ": expected newton or gradient");
    };

    real("controller.gamma", [](ScenarioConfig& c) -> double& { return c.controller.gamma; });
    integer("controller.control_steps", [](ScenarioConfig& c) -> int& { return c.controller.control_steps; });
    real("controller.record_interval", [](ScenarioConfig& c) -> double& { return c.controller.record_interval; });
    real("controller.switch_distance", [](ScenarioConfig& c) -> double& { return c.controller.switch_distance; });
    real("controller.switch_speed", [](ScenarioConfig& c) -> double& { return c.controller.switch_speed; });
    real("controller.settle_speed", [](ScenarioConfig& c) -> double& { return c.controller.settle_speed; });
    real("controller.settle_window", [](ScenarioConfig& c) -> double& { return c.controller.settle_window; });
    real("controller.settle_update", [](ScenarioConfig& c) -> double& { return c.controller.settle_update; });
    real("controller.substep_refresh", [](ScenarioConfig& c) -> double& { return c.controller.substep_refresh; });

    real("task.mu_tip", [](ScenarioConfig& c) -> double& { return c.mu_tip; });
    real("task.grasp_ramp_start", [](ScenarioConfig& c) -> double& { return c.grasp_ramp_start; });
    real("task.grasp_ramp_time", [](ScenarioConfig& c) -> double& { return c.grasp_ramp_time; });
    t["task.targets"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      c.targets.clear();
      for (const auto& row : to_rows(k, v, 2)) c.targets.emplace_back(row[0], row[1]);
    };
    t["task.target_velocity"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      const auto rows = to_rows(k, v, 2);
      if (rows.size() != 1) throw ConfigError(k + ": expected two numbers");
      c.target_velocity = {rows[0][0], rows[0][1]};
    };
    t["task.obstacles"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      const double weight = c.obstacles.empty() ? 1.0e5 : c.obstacles.front().weight;
      c.obstacles.clear();
      for (const auto& row : to_rows(k, v, 3)) {
        c.obstacles.push_back({{row[0], row[1]}, row[2], weight});
      }
    };
    t["task.obstacle_weight"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      const double weight = to_double(k, v);
      for (auto& o : c.obstacles) o.weight = weight;
    };
    t["task.grasp_object"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      const auto rows = to_rows(k, v, 3);
      if (rows.size() != 1) throw ConfigError(k + ": expected x y diameter");
      GraspObject object = c.grasp_object.value_or(GraspObject{});
      object.center = {rows[0][0], rows[0][1]};
      object.diameter = rows[0][2];
      c.grasp_object = object;
    };
    t["task.grasp_weight"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      if (!c.grasp_object) throw ConfigError(k + " needs task.grasp_object");
      c.grasp_object->weight = to_double(k, v);
    };
    t["task.activation_fraction"] = [](ScenarioConfig& c, const std::string& k,
                                       const std::string& v) {
      if (!c.grasp_object) throw ConfigError(k + " needs task.grasp_object");
      c.grasp_object->activation_fraction = to_double(k, v);
    };

    t["output.prefix"] = [](ScenarioConfig& c, const std::string&, const std::string& v) {
      c.output_prefix = v;
    };
    t["seed"] = [](ScenarioConfig& c, const std::string& k, const std::string& v) {
      const int seed = to_int(k, v);
      if (seed < 0) throw ConfigError(k + " must be non-negative");
      c.seed = static_cast<unsigned>(seed);
    };
    return t;
  }();
  return table;
}

// Keys whose setters depend on others having been applied first.
int apply_order(const std::string& key) {
  if (key == "task.obstacle_weight" || key == "task.grasp_weight" ||
      key == "task.activation_fraction") {
    return 1;
  }
  return 0;
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, std::optional<Profile> profile) {
  Entries entries = read_entries(in);
  const auto scenario_entry = entries.find("scenario");
  if (scenario_entry == entries.end()) throw ConfigError("missing required key 'scenario'");
  const Scenario scenario = parse_scenario(scenario_entry->second);
  Profile chosen = Profile::desk;
  if (const auto p = entries.find("profile"); p != entries.end()) chosen = parse_profile(p->second);
  if (profile) chosen = *profile;

  ScenarioConfig config = ScenarioConfig::defaults(scenario, chosen);
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& [key, value] : entries) {
      if (key == "scenario" || key == "profile") continue;
      const auto setter = setters().find(key);
      if (setter == setters().end()) throw ConfigError("unknown key '" + key + "'");
      if (apply_order(key) == pass) setter->second(config, key, value);
    }
  }
  config.validate();
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path, std::optional<Profile> profile) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, profile);
}

TaskSpec task_at(const ScenarioConfig& config, double t) {
  TaskSpec task;
  switch (config.scenario) {
    case Scenario::reach_multi:
      task = TaskSpec::reach(config.targets.front(), config.mu_tip);
      break;
    case Scenario::reach_moving:
      task = TaskSpec::reach(config.targets.front() + t * config.target_velocity, config.mu_tip);
      break;
    case Scenario::reach_obstacles:
      task = TaskSpec::reach(config.targets.front(), config.mu_tip);
      break;
    case Scenario::grasp: {
      GraspObject object = *config.grasp_object;
      const double start = config.grasp_ramp_start;
      if (t < config.grasp_ramp_time) {
        object.weight = start * std::pow(object.weight / start, t / config.grasp_ramp_time);
      }
      const double xi = config.obstacles.empty() ? 1.0e5 : config.obstacles.front().weight;
      task = TaskSpec::grasping(object, xi);
      break;
    }
  }
  if (config.scenario != Scenario::grasp) task.obstacles = config.obstacles;
  return task;
}

std::vector<TaskSpec> task_sequence(const ScenarioConfig& config) {
  std::vector<TaskSpec> tasks;
  if (config.scenario == Scenario::reach_multi) {
    for (const auto& target : config.targets) {
      TaskSpec task = TaskSpec::reach(target, config.mu_tip);
      task.obstacles = config.obstacles;
      tasks.push_back(std::move(task));
    }
  } else {
    tasks.push_back(task_at(config, std::numeric_limits<double>::infinity()));
  }
  return tasks;
}

double grasp_gap(const Frame& frame, const GraspObject& object, const RodGeometry& geometry) {
  const int n = geometry.elements();
  const double length = geometry.length();
  TaskSpec profile;
  profile.grasp = object;
  double weighted = 0.0;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = geometry.node_s(i);
    const double weight = ((i == 0 || i == n) ? 0.5 : 1.0) * profile.grasp_weight(s, length);
    if (weight == 0.0) continue;
    const double dist = std::hypot(frame.x[i] - object.center.x(), frame.y[i] - object.center.y());
    weighted += weight * std::abs(dist - 0.5 * (object.diameter + geometry.diameter(s)));
    total += weight;
  }
  return total > 0.0 ? weighted / total : 0.0;
}

std::vector<double> distance_metric(const Trajectory& trajectory, const ScenarioConfig& config) {
  const RodGeometry geometry(config.rod);
  const int n = geometry.elements();
  std::vector<double> out;
  out.reserve(trajectory.frames.size());
  for (const auto& frame : trajectory.frames) {
    double d = 0.0;
    if (config.scenario == Scenario::grasp) {
      d = grasp_gap(frame, *config.grasp_object, geometry);
    } else if (frame.target) {
      d = std::hypot(frame.x[n] - frame.target->x(), frame.y[n] - frame.target->y());
    }
    out.push_back(d / geometry.length());
  }
  return out;
}

namespace {

double min_clearance(const Trajectory& trajectory, const std::vector<Obstacle>& obstacles,
                     const RodGeometry& geometry) {
  double clearance = std::numeric_limits<double>::infinity();
  for (const auto& frame : trajectory.frames) {
    for (int i = 0; i <= geometry.elements(); ++i) {
      const double radius = 0.5 * geometry.diameter(geometry.node_s(i));
      for (const auto& o : obstacles) {
        const double dist = std::hypot(frame.x[i] - o.center.x(), frame.y[i] - o.center.y());
        clearance = std::min(clearance, dist - 0.5 * o.diameter - radius);
      }
    }
  }
  return std::isfinite(clearance) ? std::max(clearance, 0.0) : 0.0;
}

double static_violation(const DeformationField& w, const TaskSpec& task,
                        const RodGeometry& geometry, SpatialScheme scheme) {
  if (task.obstacles.empty()) return 0.0;
  const RodState shape = forward_sweep(w, {0.0, 0.0, 0.0}, geometry, scheme);
  double worst = 0.0;
  for (int i = 0; i <= geometry.elements(); ++i) {
    for (const auto& o : task.obstacles) {
      worst = std::max(worst, obstacle_constraint({shape.x[i], shape.y[i], 0.0},
                                                  geometry.diameter(geometry.node_s(i)), o));
    }
  }
  return worst;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const RodGeometry geometry(config.rod);

  RunResult result;
  RunReport& report = result.report;
  report.scenario = to_string(config.scenario);
  report.profile = to_string(config.profile);

  try {
    if (config.online()) {
      result.trajectory = online_pipeline([&config](double t) { return task_at(config, t); },
                                          geometry, config.sim, config.solver, config.controller);
    } else {
      result.trajectory = offline_pipeline(task_sequence(config), geometry, config.sim,
                                           config.solver, config.controller);
    }
  } catch (const SolverDivergence& e) {
    throw SolverDivergence(report.scenario + ": " + e.what());
  } catch (const SimulationInstability& e) {
    throw SimulationInstability(report.scenario + ": " + e.what());
  }
  const Trajectory& trajectory = result.trajectory;
  result.distance = distance_metric(trajectory, config);

  report.solver_converged = trajectory.solver_converged;
  for (const auto& s : trajectory.solves) report.solves_converged.push_back(s.converged);
  report.final_distance = result.distance.empty() ? 0.0 : result.distance.back() * config.rod.length;
  const TaskSpec final_task = task_sequence(config).back();
  report.min_obstacle_clearance = min_clearance(trajectory, final_task.obstacles, geometry);
  report.max_penetration = trajectory.max_penetration;
  report.static_max_violation =
      static_violation(trajectory.final_strains, final_task, geometry, config.solver.scheme);
  report.switch_times = trajectory.switch_times;
  report.lyapunov_violations = lyapunov_violations(trajectory);
  report.substeps = trajectory.substeps;
  report.settled = trajectory.settled;
  report.final_time = trajectory.frames.empty() ? 0.0 : trajectory.frames.back().t;
  report.warnings = trajectory.warnings;
  report.wall_clock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

namespace {

void put(std::ostream& out, double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  out << buffer;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, int elements) {
  out << "t";
  for (int i = 0; i <= elements; ++i) out << ",x_" << i;
  for (int i = 0; i <= elements; ++i) out << ",y_" << i;
  for (int e = 0; e < elements; ++e) out << ",theta_" << e;
  out << '\n';
  for (const auto& frame : trajectory.frames) {
    put(out, frame.t);
    for (double v : frame.x) out << ',', put(out, v);
    for (double v : frame.y) out << ',', put(out, v);
    for (double v : frame.theta) out << ',', put(out, v);
    out << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const Trajectory& trajectory,
                           const std::vector<double>& distance) {
  out << "t,kinetic,potential_desired,hamiltonian_bar,control_norm,distance\n";
  for (std::size_t k = 0; k < trajectory.diagnostics.size(); ++k) {
    const auto& d = trajectory.diagnostics[k];
    put(out, d.t);
    out << ',';
    put(out, d.kinetic);
    out << ',';
    put(out, d.potential_desired);
    out << ',';
    put(out, d.hamiltonian_bar);
    out << ',';
    put(out, d.control_norm);
    out << ',';
    put(out, k < distance.size() ? distance[k] : 0.0);
    out << '\n';
  }
}

void write_summary(std::ostream& out, const RunReport& report) {
  auto line = [&out](const std::string& key, double value) {
    out << key << " = ";
    put(out, value);
    out << '\n';
  };
  out << "scenario = " << report.scenario << '\n';
  out << "profile = " << report.profile << '\n';
  out << "solver_converged = " << (report.solver_converged ? "true" : "false") << '\n';
  for (std::size_t i = 0; i < report.solves_converged.size(); ++i) {
    out << "solve_" << i << "_converged = " << (report.solves_converged[i] ? "true" : "false")
        << '\n';
  }
  line("final_distance", report.final_distance);
  line("min_obstacle_clearance", report.min_obstacle_clearance);
  line("max_penetration", report.max_penetration);
  line("static_max_violation", report.static_max_violation);
  out << "switch_times =";
  for (double t : report.switch_times) out << ' ', put(out, t);
  out << '\n';
  out << "lyapunov_violations = " << report.lyapunov_violations << '\n';
  out << "substeps = " << report.substeps << '\n';
  out << "settled = " << (report.settled ? "true" : "false") << '\n';
  line("final_time", report.final_time);
  for (std::size_t i = 0; i < report.warnings.size(); ++i) {
    out << "warning_" << i << " = " << report.warnings[i] << '\n';
  }
  for (const auto& file : report.files) out << "file = " << file.filename().string() << '\n';
}

void emit_outputs(RunResult& result, const ScenarioConfig& config,
                  const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  const std::string prefix = config.prefix();
  const auto trajectory_path = directory / (prefix + "_trajectory.csv");
  const auto diagnostics_path = directory / (prefix + "_diagnostics.csv");
  const auto summary_path = directory / (prefix + "_summary.txt");
  {
    auto out = open_output(trajectory_path);
    write_trajectory_csv(out, result.trajectory, config.rod.elements);
  }
  {
    auto out = open_output(diagnostics_path);
    write_diagnostics_csv(out, result.trajectory, result.distance);
  }
  result.report.files = {trajectory_path, diagnostics_path, summary_path};
  auto out = open_output(summary_path);
  write_summary(out, result.report);
}

std::vector<std::filesystem::path> write_sweep_traces(const ScenarioConfig& config,
                                                      const std::filesystem::path& directory) {
  config.validate();
  std::filesystem::create_directories(directory);
  const RodGeometry geometry(config.rod);
  const StatePoint base{0.0, 0.0, 0.0};
  std::vector<std::filesystem::path> paths;

  auto trace_path = [&](std::size_t index, std::size_t count) {
    const std::string suffix = count > 1 ? "_" + std::to_string(index) : "";
    return directory / (config.prefix() + "_sweep_trace" + suffix + ".csv");
  };
  auto tip_error = [&](const TaskSpec& task, const RodState& shape) {
    return task.target ? (*task.target - shape.node(geometry.elements())).norm() : 0.0;
  };

  if (!config.online()) {
    const auto tasks = task_sequence(config);
    std::optional<DeformationField> warm;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      std::vector<TraceRow> rows;
      const SolveResult r = solve(tasks[i], base, geometry, config.solver, warm,
                                  [&rows](const TraceRow& row) { rows.push_back(row); });
      warm = r.w_bar;
      paths.push_back(trace_path(i, tasks.size()));
      auto out = open_output(paths.back());
      write_trace_csv(out, rows);
    }
    return paths;
  }

  // Online scenarios: the iterations the online pipeline performs, with the
  // task sampled at the matching simulation time.
  OnlineSolver iterate(geometry, base, config.solver);
  std::vector<TraceRow> rows;
  const double interval = config.controller.control_steps * config.sim.dt;
  for (int k = 0; k < config.solver.max_iter; ++k) {
    const TaskSpec task = task_at(config, k * interval);
    iterate.step(task);
    rows.push_back({k, iterate.last_cost(), iterate.last_update_norm(),
                    tip_error(task, iterate.last_shape())});
    if (iterate.last_update_norm() < config.solver.grad_tol) break;
  }
  paths.push_back(trace_path(0, 1));
  auto out = open_output(paths.back());
  write_trace_csv(out, rows);
  return paths;
}

}  // namespace cosserat
