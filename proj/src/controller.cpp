#include "cosserat/controller.hpp"

#include "cosserat/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cosserat {

void ControllerConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("controller: gamma must be positive");
  if (control_steps < 1) throw ConfigError("controller: control_steps must be at least 1");
  if (!(record_interval > 0.0)) throw ConfigError("controller: record_interval must be positive");
  if (!(switch_distance > 0.0)) throw ConfigError("controller: switch_distance must be positive");
  if (!(switch_speed > 0.0)) throw ConfigError("controller: switch_speed must be positive");
  if (!(settle_speed >= 0.0)) throw ConfigError("controller: settle_speed must be non-negative");
  if (!(settle_window >= 0.0)) throw ConfigError("controller: settle_window must be non-negative");
  if (!(settle_update >= 0.0)) throw ConfigError("controller: settle_update must be non-negative");
  if (!(substep_refresh > 0.0)) throw ConfigError("controller: substep_refresh must be positive");
  if (!(angle_offset >= 0.0 && angle_offset <= 1.0)) {
    throw ConfigError("controller: angle_offset must lie in [0, 1]");
  }
}

EnergyShapingControl::EnergyShapingControl(const RodGeometry& geometry,
                                           const DeformationField& target, double gamma,
                                           double offset)
    : geometry_(&geometry),
      target_(HingeStrains::from_elements(target, offset)),
      rest_(HingeStrains::from_elements(DeformationField::intrinsic(geometry), offset)),
      mass_(LumpedMass::of(geometry)),
      gamma_(gamma) {
  if (target.size() != geometry.elements()) {
    throw std::invalid_argument("EnergyShapingControl: target strains do not match the grid");
  }
}

ControlField EnergyShapingControl::operator()(const RodState& state) const {
  const RodGeometry& geometry = *geometry_;
  const int n = geometry.elements();
  const double ds = geometry.ds();
  const GeneralizedForce shaped = elastic_forces(state, target_, geometry);
  const GeneralizedForce plant = elastic_forces(state, rest_, geometry);
  ControlField u = ControlField::zero(n);
  u.damping = gamma_;
  for (int i = 1; i <= n; ++i) {
    const double length = mass_.node_length[i];
    u.fx[i] = (shaped.fx[i] - plant.fx[i]) / length;
    u.fy[i] = (shaped.fy[i] - plant.fy[i]) / length;
  }
  for (int e = 0; e < n; ++e) u.couple[e] = (shaped.torque[e] - plant.torque[e]) / ds;
  return u;
}

ControlField EnergyShapingControl::densities(const RodState& state) const {
  ControlField u = (*this)(state);
  u.fx -= u.damping * node_velocity_x(state, mass_);
  u.fy -= u.damping * node_velocity_y(state, mass_);
  const double rho = geometry_->params().density;
  const Vector omega = element_angular_velocity(state, mass_);
  for (Eigen::Index e = 0; e < omega.size(); ++e) {
    u.couple[e] -= u.damping * mass_.element_inertia[e] /
                   (rho * mass_.element_area[e] * geometry_->ds()) * omega[e];
  }
  u.fx[0] = 0.0;
  u.fy[0] = 0.0;
  u.damping = 0.0;
  return u;
}

double EnergyShapingControl::desired_potential(const RodState& state) const {
  return elastic_energy(state, target_, *geometry_);
}

double desired_potential(const RodState& state, const DeformationField& target,
                         const RodGeometry& geometry, double offset) {
  if (target.size() != geometry.elements()) {
    throw std::invalid_argument("desired_potential: target strains do not match the grid");
  }
  return elastic_energy(state, HingeStrains::from_elements(target, offset), geometry);
}

ControlField control_law(const RodState& state, const DeformationField& target,
                         const RodGeometry& geometry, double gamma, double offset) {
  return EnergyShapingControl(geometry, target, gamma, offset)(state);
}

int lyapunov_violations(const Trajectory& trajectory, double slack, double grace) {
  double reference = 0.0;
  for (const auto& d : trajectory.diagnostics) reference = std::max(reference, d.hamiltonian_bar);
  int count = 0;
  for (const auto& d : trajectory.diagnostics) {
    if (d.t > grace && d.flow_increment > slack * reference) ++count;
  }
  return count;
}

namespace {

// Shared bookkeeping of the two pipelines: stepping, recording and settling.
class ClosedLoop {
 public:
  ClosedLoop(const RodGeometry& geometry, const SimConfig& sim, const ControllerConfig& controller)
      : geometry_(geometry),
        sim_(sim),
        controller_(controller),
        mass_(LumpedMass::of(geometry)),
        state_(RodState::straight(geometry)) {
    record_every_ = std::max(1, static_cast<int>(std::lround(controller.record_interval / sim.dt)));
    total_steps_ = static_cast<long>(std::llround(sim.duration / sim.dt));
  }

  // Re-estimates the substep count for the current state and targets.
  void prepare(const EnergyShapingControl& law, const std::vector<Obstacle>& obstacles) {
    substeps_ = stable_substeps(state_, geometry_, sim_, obstacles, law.target());
    trajectory_.substeps = std::max(trajectory_.substeps, substeps_);
    sub_ = sim_;
    sub_.dt = sim_.dt / substeps_;
    prepared_at_ = time_;
  }

  void refresh(const EnergyShapingControl& law, const std::vector<Obstacle>& obstacles) {
    if (time_ - prepared_at_ >= controller_.substep_refresh - 0.5 * sim_.dt) prepare(law, obstacles);
  }

  long total_steps() const { return total_steps_; }
  double time(long k) const { return static_cast<double>(k) * sim_.dt; }
  const RodState& state() const { return state_; }
  Trajectory& trajectory() { return trajectory_; }

  double shaped_energy(const EnergyShapingControl& law, const std::vector<Obstacle>& obstacles,
                       double* contact_energy = nullptr, double* depth = nullptr) const {
    const double kinetic = kinetic_energy(state_, mass_);
    double contact = 0.0;
    if (!obstacles.empty()) {
      const ContactField c = contact_forces(state_, obstacles, geometry_, sim_);
      contact = c.energy;
      if (depth) *depth = c.max_depth;
    } else if (depth) {
      *depth = 0.0;
    }
    if (contact_energy) *contact_energy = contact;
    return kinetic + law.desired_potential(state_) + contact;
  }

  // Advances one outer step with fixed targets and accumulates the change of
  // the shaped energy.
  void advance(const EnergyShapingControl& law, const std::vector<Obstacle>& obstacles) {
    const double before = shaped_energy(law, obstacles);
    const ControlLaw u = [&law](const RodState& q) { return law(q); };
    try {
      for (int s = 0; s < substeps_; ++s) {
        state_ = step(state_, u, geometry_, sub_, obstacles);
      }
    } catch (const SimulationInstability& e) {
      throw SimulationInstability(std::string(e.what()) + " (t = " + std::to_string(time_) + " s)");
    }
    time_ += sim_.dt;
    flow_ += shaped_energy(law, obstacles) - before;
  }

  void record(double t, const EnergyShapingControl& law, const std::vector<Obstacle>& obstacles,
              const std::optional<Vec2>& target, int task_index) {
    DiagnosticSample d;
    d.t = t;
    d.kinetic = kinetic_energy(state_, mass_);
    d.potential_desired = law.desired_potential(state_);
    d.hamiltonian_bar =
        shaped_energy(law, obstacles, &d.contact_energy, &d.max_penetration);
    d.flow_increment = flow_;
    d.control_norm = law.densities(state_).sup_norm();
    flow_ = 0.0;
    trajectory_.max_penetration = std::max(trajectory_.max_penetration, d.max_penetration);
    trajectory_.diagnostics.push_back(d);
    trajectory_.frames.push_back({t, state_.x, state_.y, state_.theta, target, task_index});
  }

  bool due(long k) const { return k % record_every_ == 0; }

  double tip_speed() const {
    const int n = geometry_.elements();
    return std::hypot(state_.px[n], state_.py[n]) * mass_.node_length[n] / mass_.node_mass[n];
  }

  double max_speed() const {
    const Vector vx = node_velocity_x(state_, mass_);
    const Vector vy = node_velocity_y(state_, mass_);
    return (vx.cwiseAbs2() + vy.cwiseAbs2()).cwiseSqrt().maxCoeff();
  }

  // True once the rod has been slower than settle_speed for settle_window.
  bool settled(double t, bool eligible) {
    if (controller_.settle_speed <= 0.0 || !eligible || max_speed() >= controller_.settle_speed) {
      quiet_since_.reset();
      return false;
    }
    if (!quiet_since_) quiet_since_ = t;
    return t - *quiet_since_ >= controller_.settle_window;
  }

  Trajectory finish() {
    if (trajectory_.substeps > 1) {
      trajectory_.warnings.push_back("dt exceeds the estimated stability limit; used up to " +
                                     std::to_string(trajectory_.substeps) + " substeps");
    }
    trajectory_.final_state = state_;
    return std::move(trajectory_);
  }

 private:
  const RodGeometry& geometry_;
  SimConfig sim_;
  SimConfig sub_;
  ControllerConfig controller_;
  LumpedMass mass_;
  RodState state_;
  Trajectory trajectory_;
  int record_every_ = 1;
  long total_steps_ = 0;
  double flow_ = 0.0;
  double time_ = 0.0;
  double prepared_at_ = 0.0;
  int substeps_ = 1;
  std::optional<double> quiet_since_;
};

StatePoint clamped_base() { return {0.0, 0.0, 0.0}; }

}  // namespace

Trajectory offline_pipeline(const std::vector<TaskSpec>& tasks, const RodGeometry& geometry,
                            const SimConfig& sim, const SolverConfig& solver,
                            const ControllerConfig& controller) {
  if (tasks.empty()) throw ConfigError("offline_pipeline: no tasks");
  for (const auto& task : tasks) task.validate();
  sim.validate();
  solver.validate();
  controller.validate();

  ClosedLoop loop(geometry, sim, controller);
  Trajectory& out = loop.trajectory();

  auto solve_task = [&](std::size_t index) {
    std::optional<DeformationField> initial;
    if (!out.solves.empty()) initial = out.solves.back().w_bar;
    SolveResult result = solve(tasks[index], clamped_base(), geometry, solver, initial);
    if (!result.converged) {
      out.solver_converged = false;
      out.warnings.push_back("task " + std::to_string(index) + ": solver stopped after " +
                             std::to_string(result.iterations) + " iterations without converging");
    }
    out.solves.push_back(std::move(result));
    return EnergyShapingControl(geometry, out.solves.back().w_bar, controller.gamma,
                                controller.angle_offset);
  };

  std::size_t active = 0;
  EnergyShapingControl law = solve_task(active);
  loop.prepare(law, tasks[active].obstacles);
  loop.record(0.0, law, tasks[active].obstacles, tasks[active].target, 0);

  const double switch_distance = controller.switch_distance * geometry.params().length;
  for (long k = 1; k <= loop.total_steps(); ++k) {
    const TaskSpec& task = tasks[active];
    loop.refresh(law, task.obstacles);
    loop.advance(law, task.obstacles);
    const double t = loop.time(k);
    if (loop.due(k)) loop.record(t, law, task.obstacles, task.target, static_cast<int>(active));

    if (active + 1 < tasks.size() && task.target) {
      const StatePoint tip = loop.state().tip();
      const double distance = std::hypot(tip.x - task.target->x(), tip.y - task.target->y());
      if (distance < switch_distance && loop.tip_speed() < controller.switch_speed) {
        ++active;
        law = solve_task(active);
        loop.prepare(law, tasks[active].obstacles);
        out.switch_times.push_back(t);
        continue;
      }
    }
    if (loop.settled(t, active + 1 == tasks.size())) {
      if (!loop.due(k)) loop.record(t, law, task.obstacles, task.target, static_cast<int>(active));
      out.settled = true;
      break;
    }
  }
  out.final_strains = out.solves.back().w_bar;
  return loop.finish();
}

Trajectory online_pipeline(const TaskStream& tasks, const RodGeometry& geometry,
                           const SimConfig& sim, const SolverConfig& solver,
                           const ControllerConfig& controller) {
  if (!tasks) throw ConfigError("online_pipeline: empty task stream");
  sim.validate();
  solver.validate();
  controller.validate();

  ClosedLoop loop(geometry, sim, controller);
  Trajectory& out = loop.trajectory();
  OnlineSolver iterate(geometry, clamped_base(), solver);

  TaskSpec task = tasks(0.0);
  task.validate();
  EnergyShapingControl law(geometry, iterate.step(task), controller.gamma,
                           controller.angle_offset);
  loop.prepare(law, task.obstacles);
  loop.record(0.0, law, task.obstacles, task.target, 0);

  for (long k = 1; k <= loop.total_steps(); ++k) {
    loop.refresh(law, task.obstacles);
    loop.advance(law, task.obstacles);
    const double t = loop.time(k);
    if (loop.due(k)) loop.record(t, law, task.obstacles, task.target, 0);
    if (k % controller.control_steps == 0) {
      task = tasks(t);
      law = EnergyShapingControl(geometry, iterate.step(task), controller.gamma,
                                 controller.angle_offset);
    }
    const bool solver_quiet = iterate.last_update_norm() < controller.settle_update;
    if (loop.settled(t, solver_quiet)) {
      if (!loop.due(k)) loop.record(t, law, task.obstacles, task.target, 0);
      out.settled = true;
      break;
    }
  }
  out.final_strains = iterate.current();
  out.solver_converged = iterate.last_update_norm() < solver.grad_tol;
  return loop.finish();
}

}  // namespace cosserat
