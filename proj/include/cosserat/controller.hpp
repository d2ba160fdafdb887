#pragma once

// Energy-shaping feedback and the two closed-loop pipelines.
//
// The control replaces the rod's stored energy by the desired potential
//   V^d(q) = 1/2 int EA (nu1 - nu1^)^2 + GA (nu2 - nu2^)^2 + EI (kappa - kappa^)^2 ds
// and injects damping, u = -d(V^d - V)/dq - gamma dq/dt. On the discrete grid
// the first term is evaluated with the same operators the simulator uses for
// the internal loads, so the closed-loop equilibrium is exactly the target
// shape.

#include "cosserat/dynamics_sim.hpp"
#include "cosserat/fb_solver.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace cosserat {

enum class PipelineMode { offline, online };

struct ControllerConfig {
  double gamma = 0.01;                 // damping gain, kg/s per unit length
  PipelineMode mode = PipelineMode::offline;
  int control_steps = 1;               // simulation steps per online solver iteration
  double record_interval = 1.0e-3;     // s between recorded frames
  double switch_distance = 0.01;       // fraction of L0
  double switch_speed = 0.01;          // m/s, tip speed below which a target counts as reached
  double settle_speed = 1.0e-4;        // m/s, max node speed for early exit; 0 disables
  double settle_window = 0.2;          // s the settle condition must persist
  double settle_update = 1.0e-6;       // online only: solver update norm for early exit
  double angle_offset = 0.5;           // sweep angle sampling the targets were computed with
  double substep_refresh = 0.05;       // s between re-estimates of the stable substep count

  void validate() const;
};

double desired_potential(const RodState& state, const DeformationField& target,
                         const RodGeometry& geometry, double offset = 0.5);

// Control densities for the given state and element-centred target strains;
// the damping term -gamma dq/dt is carried in ControlField::damping.
ControlField control_law(const RodState& state, const DeformationField& target,
                         const RodGeometry& geometry, double gamma, double offset = 0.5);

// Precomputed form of control_law for repeated evaluation.
class EnergyShapingControl {
 public:
  EnergyShapingControl(const RodGeometry& geometry, const DeformationField& target, double gamma,
                       double offset = 0.5);

  // Shaping forces with the damping left to the integrator.
  ControlField operator()(const RodState& state) const;
  // Total control densities with the damping evaluated explicitly.
  ControlField densities(const RodState& state) const;
  double desired_potential(const RodState& state) const;
  const HingeStrains& target() const { return target_; }

 private:
  const RodGeometry* geometry_;
  HingeStrains target_;
  HingeStrains rest_;
  LumpedMass mass_;
  double gamma_;
};

struct Frame {
  double t = 0.0;
  Vector x, y, theta;
  std::optional<Vec2> target;
  int task_index = 0;
};

struct DiagnosticSample {
  double t = 0.0;
  double kinetic = 0.0;
  double potential_desired = 0.0;
  double contact_energy = 0.0;
  double hamiltonian_bar = 0.0;  // kinetic + desired + contact
  double flow_increment = 0.0;   // change of H^ since the previous sample at fixed targets
  double control_norm = 0.0;
  double max_penetration = 0.0;
};

struct Trajectory {
  std::vector<Frame> frames;
  std::vector<DiagnosticSample> diagnostics;
  std::vector<double> switch_times;
  std::vector<SolveResult> solves;  // offline pipeline, one per task
  DeformationField final_strains;
  RodState final_state;
  int substeps = 1;  // largest substep count used
  bool settled = false;
  bool solver_converged = true;
  double max_penetration = 0.0;
  std::vector<std::string> warnings;
};

// Samples after `grace` seconds whose flow increment exceeds
// slack * max(H^) over the run.
int lyapunov_violations(const Trajectory& trajectory, double slack = 1.0e-4, double grace = 0.01);

// Solves each task to convergence in turn; the next task is activated when
// the tip is within switch_distance of the current target and slower than
// switch_speed. Solves warm-start from the previous optimum.
Trajectory offline_pipeline(const std::vector<TaskSpec>& tasks, const RodGeometry& geometry,
                            const SimConfig& sim, const SolverConfig& solver,
                            const ControllerConfig& controller);

using TaskStream = std::function<TaskSpec(double t)>;

// One solver iteration every control_steps simulation steps against the task
// at that time.
Trajectory online_pipeline(const TaskStream& tasks, const RodGeometry& geometry,
                           const SimConfig& sim, const SolverConfig& solver,
                           const ControllerConfig& controller);

}  // namespace cosserat
