#include "cosserat/dynamics_sim.hpp"

#include "cosserat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cosserat {

namespace {

constexpr double kStabilitySafety = 0.8;

double hinge_length(const RodGeometry& geometry, int h) {
  return h == 0 ? 0.5 * geometry.ds() : geometry.ds();
}

void require_layout(const RodState& state, const RodGeometry& geometry) {
  const auto n = static_cast<Eigen::Index>(geometry.elements());
  if (state.x.size() != n + 1 || state.y.size() != n + 1 || state.theta.size() != n ||
      state.px.size() != n + 1 || state.py.size() != n + 1 || state.ptheta.size() != n) {
    throw std::invalid_argument("RodState does not match the geometry's grid");
  }
}

InternalLoads loads_from_strains(const RodState& state, const HingeStrains& strain,
                                 const HingeStrains& reference, const RodGeometry& geometry) {
  const int n = geometry.elements();
  InternalLoads out{Vector(n), Vector(n), Vector(n), Vector(n), Vector(n)};
  for (int e = 0; e < n; ++e) {
    const auto& sec = geometry.element_section(e);
    out.n1[e] = sec.EA * (strain.nu1[e] - reference.nu1[e]);
    out.n2[e] = sec.GA * (strain.nu2[e] - reference.nu2[e]);
    const double c = std::cos(state.theta[e]);
    const double s = std::sin(state.theta[e]);
    out.nx[e] = c * out.n1[e] - s * out.n2[e];
    out.ny[e] = s * out.n1[e] + c * out.n2[e];
    out.m[e] = geometry.node_section(e).EI * (strain.kappa[e] - reference.kappa[e]);
  }
  return out;
}

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("sim: dt must be positive");
  if (!(gamma >= 0.0)) throw ConfigError("sim: gamma must be non-negative");
  if (!(duration >= 0.0)) throw ConfigError("sim: duration must be non-negative");
  if (!(contact_stiffness >= 0.0)) throw ConfigError("sim: contact_stiffness must be non-negative");
  if (!(max_kinetic_energy > 0.0)) throw ConfigError("sim: max_kinetic_energy must be positive");
  if (!(max_phase_step > 0.0)) throw ConfigError("sim: max_phase_step must be positive");
}

ControlField ControlField::zero(int elements) {
  return {Vector::Zero(elements + 1), Vector::Zero(elements + 1), Vector::Zero(elements)};
}

double ControlField::sup_norm() const {
  double out = 0.0;
  for (Eigen::Index i = 0; i < fx.size(); ++i) out = std::max(out, std::hypot(fx[i], fy[i]));
  if (couple.size() > 0) out = std::max(out, couple.cwiseAbs().maxCoeff());
  return out;
}

HingeStrains HingeStrains::from_elements(const DeformationField& w, double offset) {
  const int n = w.size();
  HingeStrains out{w.nu1, w.nu2, Vector(n)};
  out.kappa[0] = 2.0 * offset * w.kappa[0];
  for (int h = 1; h < n; ++h) {
    out.kappa[h] = (1.0 - offset) * w.kappa[h - 1] + offset * w.kappa[h];
  }
  return out;
}

HingeStrains measure_strains(const RodState& state, const RodGeometry& geometry) {
  require_layout(state, geometry);
  const int n = geometry.elements();
  const double ds = geometry.ds();
  HingeStrains out{Vector(n), Vector(n), Vector(n)};
  for (int e = 0; e < n; ++e) {
    const double dx = (state.x[e + 1] - state.x[e]) / ds;
    const double dy = (state.y[e + 1] - state.y[e]) / ds;
    const double c = std::cos(state.theta[e]);
    const double s = std::sin(state.theta[e]);
    out.nu1[e] = c * dx + s * dy;
    out.nu2[e] = -s * dx + c * dy;
  }
  out.kappa[0] = state.theta[0] / (0.5 * ds);
  for (int h = 1; h < n; ++h) out.kappa[h] = (state.theta[h] - state.theta[h - 1]) / ds;
  return out;
}

LumpedMass LumpedMass::of(const RodGeometry& geometry) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  const double rho = geometry.params().density;
  LumpedMass out{Vector(n + 1), Vector::Constant(n + 1, ds), Vector(n), Vector(n)};
  for (int e = 0; e < n; ++e) {
    const auto& sec = geometry.element_section(e);
    out.element_area[e] = sec.area;
    out.element_inertia[e] = rho * sec.inertia * ds;
  }
  out.node_length[0] = 0.5 * ds;
  out.node_length[n] = 0.5 * ds;
  out.node_mass[0] = 0.5 * rho * ds * out.element_area[0];
  out.node_mass[n] = 0.5 * rho * ds * out.element_area[n - 1];
  for (int i = 1; i < n; ++i) {
    out.node_mass[i] = 0.5 * rho * ds * (out.element_area[i - 1] + out.element_area[i]);
  }
  return out;
}

InternalLoads internal_loads(const RodState& state, const RodGeometry& geometry) {
  return internal_loads(state, HingeStrains::from_elements(DeformationField::intrinsic(geometry)),
                        geometry);
}

InternalLoads internal_loads(const RodState& state, const HingeStrains& reference,
                             const RodGeometry& geometry) {
  return loads_from_strains(state, measure_strains(state, geometry), reference, geometry);
}

GeneralizedForce elastic_forces(const RodState& state, const HingeStrains& reference,
                                const RodGeometry& geometry, bool clamp_base) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  const HingeStrains strain = measure_strains(state, geometry);
  const InternalLoads loads = loads_from_strains(state, strain, reference, geometry);
  GeneralizedForce out{Vector(n + 1), Vector(n + 1), Vector(n)};
  for (int i = 0; i <= n; ++i) {
    out.fx[i] = (i < n ? loads.nx[i] : 0.0) - (i > 0 ? loads.nx[i - 1] : 0.0);
    out.fy[i] = (i < n ? loads.ny[i] : 0.0) - (i > 0 ? loads.ny[i - 1] : 0.0);
  }
  for (int e = 0; e < n; ++e) {
    const double proximal = (e == 0 && !clamp_base) ? 0.0 : loads.m[e];
    const double distal = e + 1 < n ? loads.m[e + 1] : 0.0;
    out.torque[e] = distal - proximal +
                    ds * (strain.nu1[e] * loads.n2[e] - strain.nu2[e] * loads.n1[e]);
  }
  return out;
}

double elastic_energy(const RodState& state, const HingeStrains& reference,
                      const RodGeometry& geometry, bool clamp_base) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  const HingeStrains strain = measure_strains(state, geometry);
  double energy = 0.0;
  for (int e = 0; e < n; ++e) {
    const auto& sec = geometry.element_section(e);
    const double d1 = strain.nu1[e] - reference.nu1[e];
    const double d2 = strain.nu2[e] - reference.nu2[e];
    energy += 0.5 * ds * (sec.EA * d1 * d1 + sec.GA * d2 * d2);
  }
  for (int h = clamp_base ? 0 : 1; h < n; ++h) {
    const double dk = strain.kappa[h] - reference.kappa[h];
    energy += 0.5 * hinge_length(geometry, h) * geometry.node_section(h).EI * dk * dk;
  }
  return energy;
}

ContactField contact_forces(const RodState& state, const std::vector<Obstacle>& obstacles,
                            const RodGeometry& geometry, const SimConfig& config) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  ContactField out{Vector::Zero(n + 1), Vector::Zero(n + 1)};
  for (int i = 0; i <= n; ++i) {
    const double length = (i == 0 || i == n) ? 0.5 * ds : ds;
    const double rod_diameter = geometry.diameter(geometry.node_s(i));
    for (const auto& obstacle : obstacles) {
      const Vec2 d = state.node(i) - obstacle.center;
      const double dist = d.norm();
      const double depth = 0.5 * (obstacle.diameter + rod_diameter) - dist;
      if (depth <= 0.0) continue;
      const Vec2 normal = dist > 0.0 ? Vec2(d / dist) : Vec2(0.0, 1.0);
      out.fx[i] += config.contact_stiffness * depth * normal.x();
      out.fy[i] += config.contact_stiffness * depth * normal.y();
      out.max_depth = std::max(out.max_depth, depth);
      out.energy += 0.5 * config.contact_stiffness * depth * depth * length;
    }
  }
  return out;
}

Vector node_velocity_x(const RodState& state, const LumpedMass& mass) {
  return state.px.cwiseProduct(mass.node_length).cwiseQuotient(mass.node_mass);
}

Vector node_velocity_y(const RodState& state, const LumpedMass& mass) {
  return state.py.cwiseProduct(mass.node_length).cwiseQuotient(mass.node_mass);
}

Vector element_angular_velocity(const RodState& state, const LumpedMass& mass) {
  const double ds = mass.node_length.size() > 2 ? mass.node_length[1] : 0.0;
  return state.ptheta.cwiseQuotient(mass.element_inertia / ds);
}

namespace {

Acceleration conservative_acceleration(const RodState& state, const ControlField& control,
                                       const RodGeometry& geometry, const SimConfig& config,
                                       const LumpedMass& mass,
                                       const std::vector<Obstacle>& obstacles) {
  require_layout(state, geometry);
  const int n = geometry.elements();
  const double ds = geometry.ds();
  const HingeStrains rest = HingeStrains::from_elements(DeformationField::intrinsic(geometry));
  const GeneralizedForce elastic = elastic_forces(state, rest, geometry, config.clamp_base);
  const ContactField contact =
      obstacles.empty() ? ContactField{Vector::Zero(n + 1), Vector::Zero(n + 1)}
                        : contact_forces(state, obstacles, geometry, config);
  Acceleration out{Vector(n + 1), Vector(n + 1), Vector(n)};
  for (int i = 0; i <= n; ++i) {
    const double length = mass.node_length[i];
    out.px[i] = elastic.fx[i] / length + control.fx[i] + contact.fx[i];
    out.py[i] = elastic.fy[i] / length + control.fy[i] + contact.fy[i];
  }
  for (int e = 0; e < n; ++e) out.ptheta[e] = elastic.torque[e] / ds + control.couple[e];
  if (config.clamp_base) {
    out.px[0] = 0.0;
    out.py[0] = 0.0;
  }
  return out;
}

// Exact solution over h of the damping flow: force density -c v on nodes and
// couple density -c (I/A) omega on elements.
void apply_damping(RodState& state, double c, double h, const LumpedMass& mass, double rho) {
  if (c <= 0.0) return;
  for (Eigen::Index i = 0; i < state.px.size(); ++i) {
    const double decay = std::exp(-c * h * mass.node_length[i] / mass.node_mass[i]);
    state.px[i] *= decay;
    state.py[i] *= decay;
  }
  for (Eigen::Index e = 0; e < state.ptheta.size(); ++e) {
    state.ptheta[e] *= std::exp(-c * h / (rho * mass.element_area[e]));
  }
}

}  // namespace

Acceleration acceleration(const RodState& state, const ControlField& control,
                          const RodGeometry& geometry, const SimConfig& config,
                          const std::vector<Obstacle>& obstacles) {
  const LumpedMass mass = LumpedMass::of(geometry);
  Acceleration out = conservative_acceleration(state, control, geometry, config, mass, obstacles);
  const double c = config.gamma + control.damping;
  out.px -= c * node_velocity_x(state, mass);
  out.py -= c * node_velocity_y(state, mass);
  out.ptheta -= c * element_angular_velocity(state, mass).cwiseProduct(
                        mass.element_inertia.cwiseQuotient(mass.element_area) /
                        (geometry.params().density * geometry.ds()));
  if (config.clamp_base) {
    out.px[0] = 0.0;
    out.py[0] = 0.0;
  }
  return out;
}

RodState step(const RodState& state, const ControlField& control, const RodGeometry& geometry,
              const SimConfig& config, const std::vector<Obstacle>& obstacles) {
  return step(state, [&](const RodState&) { return control; }, geometry, config, obstacles);
}

RodState step(const RodState& state, const ControlLaw& control, const RodGeometry& geometry,
              const SimConfig& config, const std::vector<Obstacle>& obstacles) {
  const double dt = config.dt;
  const LumpedMass mass = LumpedMass::of(geometry);

  RodState next = state;
  const ControlField u0 = control(state);
  apply_damping(next, config.gamma + u0.damping, 0.5 * dt, mass, geometry.params().density);
  const Acceleration first = conservative_acceleration(state, u0, geometry, config, mass, obstacles);
  next.px += 0.5 * dt * first.px;
  next.py += 0.5 * dt * first.py;
  next.ptheta += 0.5 * dt * first.ptheta;

  next.x += dt * node_velocity_x(next, mass);
  next.y += dt * node_velocity_y(next, mass);
  next.theta += dt * element_angular_velocity(next, mass);
  if (config.clamp_base) {
    next.x[0] = state.x[0];
    next.y[0] = state.y[0];
  }

  const ControlField u1 = control(next);
  const Acceleration second = conservative_acceleration(next, u1, geometry, config, mass, obstacles);
  next.px += 0.5 * dt * second.px;
  next.py += 0.5 * dt * second.py;
  next.ptheta += 0.5 * dt * second.ptheta;
  apply_damping(next, config.gamma + u1.damping, 0.5 * dt, mass, geometry.params().density);
  if (config.clamp_base) {
    next.px[0] = 0.0;
    next.py[0] = 0.0;
  }

  const double kinetic = kinetic_energy(next, mass);
  if (!std::isfinite(kinetic) || kinetic > config.max_kinetic_energy) {
    throw SimulationInstability("step: kinetic energy " + std::to_string(kinetic) +
                                " J exceeds the bound");
  }
  return next;
}

double kinetic_energy(const RodState& state, const LumpedMass& mass) {
  const Vector vx = node_velocity_x(state, mass);
  const Vector vy = node_velocity_y(state, mass);
  const Vector omega = element_angular_velocity(state, mass);
  return 0.5 * (mass.node_mass.dot(vx.cwiseAbs2() + vy.cwiseAbs2()) +
                mass.element_inertia.dot(omega.cwiseAbs2()));
}

Energies total_energy(const RodState& state, const RodGeometry& geometry,
                      const std::optional<HingeStrains>& target, bool clamp_base) {
  Energies out;
  out.kinetic = kinetic_energy(state, LumpedMass::of(geometry));
  const HingeStrains reference =
      target ? *target : HingeStrains::from_elements(DeformationField::intrinsic(geometry));
  out.potential = elastic_energy(state, reference, geometry, clamp_base);
  out.total = out.kinetic + out.potential;
  return out;
}

double estimate_max_frequency(const RodState& state, const RodGeometry& geometry,
                              const SimConfig& config, const std::vector<Obstacle>& obstacles,
                              const std::optional<HingeStrains>& reference) {
  const int n = geometry.elements();
  const LumpedMass mass = LumpedMass::of(geometry);
  const HingeStrains rest =
      reference ? *reference : HingeStrains::from_elements(DeformationField::intrinsic(geometry));
  const int dim = 3 * n + 2;
  const int first = config.clamp_base ? 1 : 0;

  // Coordinates: x_i, y_i for i >= first, then theta_e; mass-normalised.
  Vector inv_sqrt_mass(dim);
  for (int i = 0; i <= n; ++i) {
    inv_sqrt_mass[2 * i] = 1.0 / std::sqrt(mass.node_mass[i]);
    inv_sqrt_mass[2 * i + 1] = inv_sqrt_mass[2 * i];
  }
  for (int e = 0; e < n; ++e) inv_sqrt_mass[2 * (n + 1) + e] = 1.0 / std::sqrt(mass.element_inertia[e]);

  auto force = [&](const Vector& offset) {
    RodState q = state;
    for (int i = 0; i <= n; ++i) {
      q.x[i] += offset[2 * i];
      q.y[i] += offset[2 * i + 1];
    }
    for (int e = 0; e < n; ++e) q.theta[e] += offset[2 * (n + 1) + e];
    const GeneralizedForce f = elastic_forces(q, rest, geometry, config.clamp_base);
    Vector out(dim);
    for (int i = 0; i <= n; ++i) {
      out[2 * i] = f.fx[i];
      out[2 * i + 1] = f.fy[i];
    }
    for (int e = 0; e < n; ++e) out[2 * (n + 1) + e] = f.torque[e];
    if (!obstacles.empty()) {
      const ContactField c = contact_forces(q, obstacles, geometry, config);
      for (int i = 0; i <= n; ++i) {
        out[2 * i] += c.fx[i] * mass.node_length[i];
        out[2 * i + 1] += c.fy[i] * mass.node_length[i];
      }
    }
    for (int i = 0; i < first; ++i) out.segment<2>(2 * i).setZero();
    return out;
  };

  Vector v(dim);
  for (int k = 0; k < dim; ++k) v[k] = (k % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.1 * (k % 7));
  for (int i = 0; i < first; ++i) v.segment<2>(2 * i).setZero();
  v.normalize();
  double lambda = 0.0;
  const double eps = 1e-7 * geometry.ds();
  for (int it = 0; it < 200; ++it) {
    const Vector displacement = inv_sqrt_mass.cwiseProduct(v);
    const double scale = eps / displacement.lpNorm<Eigen::Infinity>();
    const Vector kv = -(force(scale * displacement) - force(-scale * displacement)) / (2.0 * scale);
    Vector next = inv_sqrt_mass.cwiseProduct(kv);
    for (int i = 0; i < first; ++i) next.segment<2>(2 * i).setZero();
    const double estimate = std::abs(v.dot(next));
    const double norm = next.norm();
    if (norm == 0.0) break;
    v = next / norm;
    if (it > 20 && std::abs(estimate - lambda) <= 1e-6 * estimate) {
      lambda = estimate;
      break;
    }
    lambda = estimate;
  }
  return std::sqrt(lambda);
}

int stable_substeps(const RodState& state, const RodGeometry& geometry, const SimConfig& config,
                    const std::vector<Obstacle>& obstacles,
                    const std::optional<HingeStrains>& reference) {
  double contact = 0.0;
  if (!obstacles.empty()) {
    // Contacts that open later add up to k / (rho A) to the squared frequency.
    const LumpedMass mass = LumpedMass::of(geometry);
    for (int i = 0; i <= geometry.elements(); ++i) {
      contact = std::max(contact, config.contact_stiffness * mass.node_length[i] / mass.node_mass[i]);
    }
  }
  auto with_contact = [&](double omega) { return std::sqrt(omega * omega + contact); };
  const double nominal =
      with_contact(estimate_max_frequency(RodState::straight(geometry), geometry, config));
  const double actual =
      reference ? with_contact(estimate_max_frequency(state, geometry, config, obstacles, reference))
                : nominal;
  const double step = std::min(nominal > 0.0 ? config.max_phase_step / nominal : config.dt,
                               actual > 0.0 ? kStabilitySafety * 2.0 / actual : config.dt);
  return std::max(1, static_cast<int>(std::ceil(config.dt / step)));
}

}  // namespace cosserat
