#include "cosserat/rod_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace cosserat {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("RodGeometry: " + what);
}

SectionProperties make_section(const RodParameters& p, double diameter) {
  SectionProperties sec;
  sec.diameter = diameter;
  sec.area = std::numbers::pi * diameter * diameter / 4.0;
  sec.inertia = sec.area * sec.area / (4.0 * std::numbers::pi);
  sec.EA = p.youngs_modulus * sec.area;
  sec.GA = p.shear_modulus * sec.area;
  sec.EI = p.youngs_modulus * sec.inertia;
  return sec;
}

}  // namespace

RodGeometry::RodGeometry(const RodParameters& params)
    : RodGeometry(params, Vector::Ones(params.elements > 0 ? params.elements : 0),
                  Vector::Zero(params.elements > 0 ? params.elements : 0),
                  Vector::Zero(params.elements > 0 ? params.elements : 0)) {}

RodGeometry::RodGeometry(const RodParameters& params, Vector intrinsic_nu1,
                         Vector intrinsic_nu2, Vector intrinsic_kappa)
    : params_(params),
      ds_(params.length / params.elements),
      intrinsic_nu1_(std::move(intrinsic_nu1)),
      intrinsic_nu2_(std::move(intrinsic_nu2)),
      intrinsic_kappa_(std::move(intrinsic_kappa)) {
  require(params.length > 0.0, "length must be positive");
  require(params.diameter_base > 0.0, "base diameter must be positive");
  require(params.diameter_tip > 0.0, "tip diameter must be positive");
  require(params.youngs_modulus > 0.0, "Young's modulus must be positive");
  require(params.shear_modulus > 0.0, "shear modulus must be positive");
  require(params.density > 0.0, "density must be positive");
  require(params.elements >= 2, "at least two elements are required");
  const auto n = static_cast<Eigen::Index>(params.elements);
  require(intrinsic_nu1_.size() == n && intrinsic_nu2_.size() == n &&
              intrinsic_kappa_.size() == n,
          "intrinsic strain fields must have one sample per element");
  require((intrinsic_nu1_.array() > 0.0).all(), "intrinsic stretch must be positive");

  element_sections_.reserve(params.elements);
  for (int e = 0; e < params.elements; ++e) {
    element_sections_.push_back(make_section(params_, diameter(element_s(e))));
  }
  node_sections_.reserve(params.elements + 1);
  for (int i = 0; i <= params.elements; ++i) {
    node_sections_.push_back(make_section(params_, diameter(node_s(i))));
  }
}

double RodGeometry::diameter(double s) const {
  const auto& p = params_;
  return (p.diameter_tip * s + p.diameter_base * (p.length - s)) / p.length;
}

MaterialPoint RodGeometry::element_point(int e) const {
  const auto& sec = element_sections_[e];
  return {element_s(e), sec.diameter, sec.stiffness(), intrinsic(e)};
}

MaterialPoint RodGeometry::node_point(int i) const {
  const double s = node_s(i);
  const SectionProperties sec = make_section(params_, diameter(s));
  // Intrinsic strain is an element quantity; nodes report the nearest element.
  const int e = std::clamp(i, 0, params_.elements - 1);
  return {s, sec.diameter, sec.stiffness(), intrinsic(e)};
}

SectionProperties section_properties(const RodGeometry& geometry, double s) {
  const double L = geometry.length();
  // Tolerate round-off when s is built as i*ds.
  if (!(s >= -1e-12 * L && s <= L * (1.0 + 1e-12))) {
    throw std::out_of_range("section_properties: s = " + std::to_string(s) +
                            " outside [0, L0]");
  }
  return make_section(geometry.params(), geometry.diameter(std::clamp(s, 0.0, L)));
}

DeformationField DeformationField::intrinsic(const RodGeometry& geometry) {
  return {geometry.intrinsic_nu1(), geometry.intrinsic_nu2(), geometry.intrinsic_kappa()};
}

DeformationField DeformationField::uniform(int elements, StrainPoint w) {
  return {Vector::Constant(elements, w.nu1), Vector::Constant(elements, w.nu2),
          Vector::Constant(elements, w.kappa)};
}

void DeformationField::check(int expected_elements) const {
  const auto n = static_cast<Eigen::Index>(expected_elements);
  if (nu1.size() != n || nu2.size() != n || kappa.size() != n) {
    throw std::invalid_argument("DeformationField: expected " +
                                std::to_string(expected_elements) + " samples per strain");
  }
  if (!nu1.allFinite() || !nu2.allFinite() || !kappa.allFinite()) {
    throw std::invalid_argument("DeformationField: non-finite strain sample");
  }
  if ((nu1.array() <= 0.0).any()) {
    throw std::invalid_argument("DeformationField: stretch nu1 must be positive");
  }
}

Vector DeformationField::packed() const {
  Vector out(3 * size());
  for (int e = 0; e < size(); ++e) {
    out[3 * e] = nu1[e];
    out[3 * e + 1] = nu2[e];
    out[3 * e + 2] = kappa[e];
  }
  return out;
}

DeformationField DeformationField::unpack(const Vector& packed) {
  const auto n = static_cast<int>(packed.size() / 3);
  DeformationField w = uniform(n, {});
  for (int e = 0; e < n; ++e) {
    w.set(e, {packed[3 * e], packed[3 * e + 1], packed[3 * e + 2]});
  }
  return w;
}

RodState RodState::straight(const RodGeometry& geometry) {
  const int n = geometry.elements();
  RodState state;
  state.x = Vector::LinSpaced(n + 1, 0.0, geometry.length());
  state.y = Vector::Zero(n + 1);
  state.theta = Vector::Zero(n);
  state.px = Vector::Zero(n + 1);
  state.py = Vector::Zero(n + 1);
  state.ptheta = Vector::Zero(n);
  return state;
}

StatePoint RodState::tip() const {
  const auto last = x.size() - 1;
  return {x[last], y[last], theta.size() > 0 ? theta[theta.size() - 1] : 0.0};
}

StatePoint kinematics_rhs(const StatePoint& q, const StrainPoint& w) {
  const double c = std::cos(q.theta);
  const double s = std::sin(q.theta);
  return {w.nu1 * c - w.nu2 * s, w.nu1 * s + w.nu2 * c, w.kappa};
}

double stored_energy_density(const StrainPoint& w, const StrainPoint& intrinsic,
                             const SectionStiffness& k) {
  const double d1 = w.nu1 - intrinsic.nu1;
  const double d2 = w.nu2 - intrinsic.nu2;
  const double d3 = w.kappa - intrinsic.kappa;
  return 0.5 * (k.EA * d1 * d1 + k.GA * d2 * d2 + k.EI * d3 * d3);
}

MaterialLoads constitutive_map(const StrainPoint& w, const StrainPoint& intrinsic,
                               const SectionStiffness& k) {
  return {k.EA * (w.nu1 - intrinsic.nu1), k.GA * (w.nu2 - intrinsic.nu2),
          k.EI * (w.kappa - intrinsic.kappa)};
}

MaterialLoads to_material_frame(const CostatePoint& lambda, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {lambda.lam1 * c + lambda.lam2 * s, -lambda.lam1 * s + lambda.lam2 * c, lambda.lam3};
}

double total_potential_energy(const DeformationField& w, const RodGeometry& geometry) {
  w.check(geometry.elements());
  double energy = 0.0;
  for (int e = 0; e < geometry.elements(); ++e) {
    energy += stored_energy_density(w.at(e), geometry.intrinsic(e),
                                    geometry.element_section(e).stiffness());
  }
  return energy * geometry.ds();
}

}  // namespace cosserat
