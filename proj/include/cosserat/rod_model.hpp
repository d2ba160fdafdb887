#pragma once

// Planar Cosserat rod: geometry, strain kinematics and the quadratic
// stored-energy / constitutive model shared by the statics solver and the
// dynamic simulator.
//
// Grid layout (staggered): positions live on N+1 nodes s_i = i*ds, angles,
// strains and section properties on the N element midpoints (e + 1/2)*ds.

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace cosserat {

using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

struct StatePoint {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct StrainPoint {
  double nu1 = 1.0;
  double nu2 = 0.0;
  double kappa = 0.0;
};

struct CostatePoint {
  double lam1 = 0.0;
  double lam2 = 0.0;
  double lam3 = 0.0;
};

// Internal force (n1, n2) and couple m expressed in the material frame.
struct MaterialLoads {
  double n1 = 0.0;
  double n2 = 0.0;
  double m = 0.0;
};

struct SectionStiffness {
  double EA = 0.0;
  double GA = 0.0;
  double EI = 0.0;
};

struct SectionProperties {
  double diameter = 0.0;
  double area = 0.0;
  double inertia = 0.0;
  double EA = 0.0;
  double GA = 0.0;
  double EI = 0.0;

  SectionStiffness stiffness() const { return {EA, GA, EI}; }
};

// Everything the pointwise Hamiltonian needs to know about the rod at s.
struct MaterialPoint {
  double s = 0.0;
  double diameter = 0.0;
  SectionStiffness stiffness;
  StrainPoint intrinsic;
};

struct RodParameters {
  double length = 0.20;          // m
  double diameter_base = 0.02;   // m
  double diameter_tip = 0.0004;  // m
  double youngs_modulus = 1.0e4; // Pa
  double shear_modulus = 1.0e3;  // Pa
  double density = 700.0;        // kg/m^3
  int elements = 100;
};

class RodGeometry {
 public:
  // Straight rest shape: intrinsic strains (1, 0, 0) everywhere.
  explicit RodGeometry(const RodParameters& params);
  RodGeometry(const RodParameters& params, Vector intrinsic_nu1,
              Vector intrinsic_nu2, Vector intrinsic_kappa);

  const RodParameters& params() const { return params_; }
  int elements() const { return params_.elements; }
  int nodes() const { return params_.elements + 1; }
  double length() const { return params_.length; }
  double ds() const { return ds_; }

  double node_s(int i) const { return ds_ * i; }
  double element_s(int e) const { return ds_ * (e + 0.5); }

  // Linear taper normalised by the length so that diameter(0) is the base
  // value and diameter(L0) the tip value.
  double diameter(double s) const;

  // Precomputed at element midpoints and at nodes.
  const SectionProperties& element_section(int e) const { return element_sections_[e]; }
  const SectionProperties& node_section(int i) const { return node_sections_[i]; }
  StrainPoint intrinsic(int e) const {
    return {intrinsic_nu1_[e], intrinsic_nu2_[e], intrinsic_kappa_[e]};
  }
  MaterialPoint element_point(int e) const;
  MaterialPoint node_point(int i) const;

  const Vector& intrinsic_nu1() const { return intrinsic_nu1_; }
  const Vector& intrinsic_nu2() const { return intrinsic_nu2_; }
  const Vector& intrinsic_kappa() const { return intrinsic_kappa_; }

 private:
  RodParameters params_;
  double ds_;
  Vector intrinsic_nu1_, intrinsic_nu2_, intrinsic_kappa_;
  std::vector<SectionProperties> element_sections_;
  std::vector<SectionProperties> node_sections_;
};

// A = pi phi^2 / 4, I = A^2 / (4 pi). Throws std::out_of_range outside [0, L0].
SectionProperties section_properties(const RodGeometry& geometry, double s);

// Strain triple w = (nu1, nu2, kappa) sampled on the element midpoints.
struct DeformationField {
  Vector nu1, nu2, kappa;

  static DeformationField intrinsic(const RodGeometry& geometry);
  static DeformationField uniform(int elements, StrainPoint w);

  int size() const { return static_cast<int>(nu1.size()); }
  StrainPoint at(int e) const { return {nu1[e], nu2[e], kappa[e]}; }
  void set(int e, StrainPoint w) {
    nu1[e] = w.nu1;
    nu2[e] = w.nu2;
    kappa[e] = w.kappa;
  }

  // Throws std::invalid_argument on mismatched sizes, non-finite samples or
  // a non-positive stretch.
  void check(int expected_elements) const;

  // Interleaved (nu1_0, nu2_0, kappa_0, nu1_1, ...).
  Vector packed() const;
  static DeformationField unpack(const Vector& packed);
};

// Lab-frame costate on the element midpoints: (lam1, lam2) internal force,
// lam3 internal couple.
struct CostateField {
  Vector lam1, lam2, lam3;

  int size() const { return static_cast<int>(lam1.size()); }
  CostatePoint at(int e) const { return {lam1[e], lam2[e], lam3[e]}; }
};

// Discretised configuration. Positions and translational momentum densities
// on nodes, angle and angular momentum density on elements.
struct RodState {
  Vector x, y, theta;
  Vector px, py, ptheta;

  static RodState straight(const RodGeometry& geometry);
  int elements() const { return static_cast<int>(theta.size()); }
  Vec2 node(int i) const { return {x[i], y[i]}; }
  StatePoint tip() const;
};

// d/ds (x, y, theta) = (nu1 cos - nu2 sin, nu1 sin + nu2 cos, kappa).
StatePoint kinematics_rhs(const StatePoint& q, const StrainPoint& w);

// Quadratic stored energy density about the intrinsic strain.
double stored_energy_density(const StrainPoint& w, const StrainPoint& intrinsic,
                             const SectionStiffness& k);

// (dW/dnu1, dW/dnu2, dW/dkappa).
MaterialLoads constitutive_map(const StrainPoint& w, const StrainPoint& intrinsic,
                               const SectionStiffness& k);

// Lab-frame costate -> material-frame loads (n1, n2, m).
MaterialLoads to_material_frame(const CostatePoint& lambda, double theta);

// Midpoint quadrature of the stored energy over [0, L0].
double total_potential_energy(const DeformationField& w, const RodGeometry& geometry);

}  // namespace cosserat
