#pragma once

// Explicit time integration of the planar Cosserat rod on the staggered grid.
//
// Stretch and shear live on elements, curvature on hinges. Hinge h sits at
// node h and measures (theta_h - theta_{h-1}) / ds; hinge 0 couples the first
// element to the clamping wall over half an element. Forces are lumped on
// nodes, couples on elements; the public API exchanges densities.

#include "cosserat/rod_model.hpp"
#include "cosserat/statics_ocp.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace cosserat {

struct SimConfig {
  double dt = 1.0e-5;
  double gamma = 0.0;  // material damping density; the controller owns the control damping
  double duration = 6.0;
  double contact_stiffness = 1.0e4;
  double max_kinetic_energy = 1.0;  // J
  // Largest omega_max * dt per substep used by the pipelines. Verlet is
  // stable up to 2, but its energy error in the stiffest modes only stays
  // below the Lyapunov slack for much smaller phase steps.
  double max_phase_step = 0.04;
  bool clamp_base = true;

  void validate() const;
};

// Distributed control: forces per unit length on nodes, couples per unit
// length on elements, plus a velocity feedback -damping * dq/dt that step()
// integrates exactly rather than through the explicit kick.
struct ControlField {
  Vector fx, fy, couple;
  double damping = 0.0;

  static ControlField zero(int elements);
  double sup_norm() const;
};

// Strains measured from a configuration, or prescribed reference strains, in
// the dynamic layout: nu on elements, kappa on hinges.
struct HingeStrains {
  Vector nu1, nu2;  // N elements
  Vector kappa;     // N hinges

  // Maps an element-centred strain field onto the dynamic layout so that the
  // shape generated by the sweep with the given angle offset has zero
  // strain error.
  static HingeStrains from_elements(const DeformationField& w, double offset = 0.5);
};

HingeStrains measure_strains(const RodState& state, const RodGeometry& geometry);

// Lumped inertia and the length each node or element represents.
struct LumpedMass {
  Vector node_mass;       // kg
  Vector node_length;     // m
  Vector element_inertia; // kg m^2
  Vector element_area;    // m^2, for density conversions

  static LumpedMass of(const RodGeometry& geometry);
};

// Material-frame (n1, n2) on elements, lab-frame (nx, ny) on elements and the
// hinge couples m, all about the given reference strains.
struct InternalLoads {
  Vector n1, n2, nx, ny;
  Vector m;
};

InternalLoads internal_loads(const RodState& state, const RodGeometry& geometry);
InternalLoads internal_loads(const RodState& state, const HingeStrains& reference,
                             const RodGeometry& geometry);

// Lumped generalised force -dV_ref/dq: node forces (N) and element couples (N m).
struct GeneralizedForce {
  Vector fx, fy, torque;
};

GeneralizedForce elastic_forces(const RodState& state, const HingeStrains& reference,
                                const RodGeometry& geometry, bool clamp_base = true);

double elastic_energy(const RodState& state, const HingeStrains& reference,
                      const RodGeometry& geometry, bool clamp_base = true);

// Penalty contact force densities (N/m) on nodes.
struct ContactField {
  Vector fx, fy;
  double max_depth = 0.0;
  double energy = 0.0;  // 1/2 k depth^2 integrated over the node lengths
};

ContactField contact_forces(const RodState& state, const std::vector<Obstacle>& obstacles,
                            const RodGeometry& geometry, const SimConfig& config);

// d/dt of the momentum densities, damping included.
struct Acceleration {
  Vector px, py, ptheta;
};

Acceleration acceleration(const RodState& state, const ControlField& control,
                          const RodGeometry& geometry, const SimConfig& config,
                          const std::vector<Obstacle>& obstacles = {});

using ControlLaw = std::function<ControlField(const RodState&)>;

// One velocity-Verlet step of length config.dt for the conservative and
// explicit control forces, with the linear damping (material plus control)
// split off symmetrically and integrated exactly: D(dt/2) K(dt/2) X(dt)
// K(dt/2) D(dt/2). The control law is evaluated at both force evaluations.
// Throws SimulationInstability on non-finite or excessive kinetic energy.
RodState step(const RodState& state, const ControlLaw& control, const RodGeometry& geometry,
              const SimConfig& config, const std::vector<Obstacle>& obstacles = {});
RodState step(const RodState& state, const ControlField& control, const RodGeometry& geometry,
              const SimConfig& config, const std::vector<Obstacle>& obstacles = {});

struct Energies {
  double kinetic = 0.0;
  double potential = 0.0;
  double total = 0.0;
};

double kinetic_energy(const RodState& state, const LumpedMass& mass);

// Potential about the intrinsic strains, or about target strains (the
// shaped potential V^d) when supplied.
Energies total_energy(const RodState& state, const RodGeometry& geometry,
                      const std::optional<HingeStrains>& target = std::nullopt,
                      bool clamp_base = true);

// Velocities from the stored momentum densities.
Vector node_velocity_x(const RodState& state, const LumpedMass& mass);
Vector node_velocity_y(const RodState& state, const LumpedMass& mass);
Vector element_angular_velocity(const RodState& state, const LumpedMass& mass);

// Largest angular frequency of the linearised dynamics around the state
// (power iteration on M^-1 K, K by central differences of the forces). The
// elastic forces are taken about the reference strains, the intrinsic ones
// by default; under energy shaping the closed loop is elastic about the
// target strains.
double estimate_max_frequency(const RodState& state, const RodGeometry& geometry,
                              const SimConfig& config, const std::vector<Obstacle>& obstacles = {},
                              const std::optional<HingeStrains>& reference = std::nullopt);

// Number of equal substeps of config.dt that keeps dt * omega_max below
// max_phase_step for the spectrum of the straight rest configuration and below the
// Verlet stability limit (with a safety margin) for the spectrum about the
// reference strains.
int stable_substeps(const RodState& state, const RodGeometry& geometry, const SimConfig& config,
                    const std::vector<Obstacle>& obstacles = {},
                    const std::optional<HingeStrains>& reference = std::nullopt);

}  // namespace cosserat
