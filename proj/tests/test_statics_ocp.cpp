#include "cosserat/statics_ocp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cosserat;

namespace {

MaterialPoint sample_point(std::mt19937& rng, double s) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  MaterialPoint at;
  at.s = s;
  at.diameter = 0.01 * u(rng);
  at.stiffness = {u(rng), u(rng), 0.1 * u(rng)};
  at.intrinsic = {1.0, 0.0, 0.0};
  return at;
}

double& component(StatePoint& q, int i) { return i == 0 ? q.x : i == 1 ? q.y : q.theta; }
double& component(StrainPoint& w, int i) { return i == 0 ? w.nu1 : i == 1 ? w.nu2 : w.kappa; }

}  // namespace

TEST_CASE("tip cost") {
  CHECK(phi_tip({0.09, 0.09, 0.3}, {0.09, 0.09}) == 0.0);
  CHECK(phi_tip({0.0, 0.0, 0.0}, {3.0, 4.0}) == 12.5);
  CHECK(phi_tip({0.0, 0.0, 1.7}, {3.0, 4.0}) == 12.5);
}

TEST_CASE("obstacle constraint and violation") {
  const Obstacle sphere{{0.1, 0.0}, 0.04, 1.0};
  CHECK(obstacle_constraint({1.0, 1.0, 0.0}, 0.01, sphere) < 0.0);
  CHECK(obstacle_constraint({0.1, 0.0, 0.0}, 0.01, sphere) == doctest::Approx(0.025 * 0.025));
  CHECK(obstacle_constraint({0.125, 0.0, 0.0}, 0.01, sphere) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(violation_rhs({1.0, 1.0, 0.0}, sphere, 0.01) == 0.0);
  CHECK(violation_rhs({0.11, 0.0, 0.0}, sphere, 0.01) ==
        obstacle_constraint({0.11, 0.0, 0.0}, 0.01, sphere));
}

TEST_CASE("grasp cost") {
  const GraspObject object{{0.06, 0.03}, 0.04, 1e3, 0.4};
  CHECK(grasp_cost({0.08, 0.03, 0.0}, object) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(grasp_cost({0.06, 0.06, 0.0}, object) == doctest::Approx(0.01));
  CHECK(grasp_cost({0.06, 0.03, 0.0}, object) == doctest::Approx(0.02));
}

TEST_CASE("control Hamiltonian") {
  const TaskSpec none;
  MaterialPoint at;
  at.stiffness = {2.0, 1.0, 0.5};
  CHECK(control_hamiltonian({0.0, 0.0, 0.3}, {}, {1.0, 0.0, 0.0}, at, none, 1.0) == 0.0);
  CHECK(control_hamiltonian({0.0, 0.0, 0.3}, {}, {1.2, 0.3, 1.0}, at, none, 1.0) ==
        doctest::Approx(-stored_energy_density({1.2, 0.3, 1.0}, at.intrinsic, at.stiffness)));
}

TEST_CASE("strain gradient and maximiser") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TaskSpec none;
  for (int trial = 0; trial < 100; ++trial) {
    const MaterialPoint at = sample_point(rng, 0.5);
    const StatePoint q{u(rng), u(rng), 3.0 * u(rng)};
    const CostatePoint lambda{u(rng), u(rng), u(rng)};
    const StrainPoint w{1.0 + 0.3 * u(rng), 0.3 * u(rng), u(rng)};
    const StrainPoint g = hamiltonian_strain_gradient(q, lambda, w, at);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      StrainPoint plus = w, minus = w;
      component(plus, i) += h;
      component(minus, i) -= h;
      const double fd = (control_hamiltonian(q, lambda, plus, at, none, 1.0) -
                         control_hamiltonian(q, lambda, minus, at, none, 1.0)) / (2.0 * h);
      StrainPoint gg = g;
      CHECK(component(gg, i) == doctest::Approx(fd).epsilon(1e-6).scale(1e-3));
    }
    StrainPoint best = maximizing_strain(q, lambda, at);
    const StrainPoint zero = hamiltonian_strain_gradient(q, lambda, best, at);
    CHECK(std::abs(zero.nu1) < 1e-12);
    CHECK(std::abs(zero.nu2) < 1e-12);
    CHECK(std::abs(zero.kappa) < 1e-12);
    const MaterialLoads back = constitutive_map(best, at.intrinsic, at.stiffness);
    const MaterialLoads rotated = to_material_frame(lambda, q.theta);
    CHECK(back.n1 == doctest::Approx(rotated.n1));
    CHECK(back.n2 == doctest::Approx(rotated.n2));
    CHECK(back.m == doctest::Approx(rotated.m));
  }
}

TEST_CASE("costate equation") {
  MaterialPoint at;
  at.stiffness = {1.0, 1.0, 1.0};
  const TaskSpec none;
  SUBCASE("force rows vanish without obstacles or grasp") {
    const CostatePoint r = costate_rhs({0.1, 0.2, 0.3}, {1.0, 2.0, 3.0}, {1.1, 0.2, 0.5}, at, none, 1.0);
    CHECK(r.lam1 == 0.0);
    CHECK(r.lam2 == 0.0);
  }
  SUBCASE("tangent force on an unsheared rod exerts no couple") {
    const double theta = 0.7;
    const CostatePoint lambda{2.0 * std::cos(theta), 2.0 * std::sin(theta), 0.0};
    const CostatePoint r = costate_rhs({0.0, 0.0, theta}, lambda, {1.2, 0.0, 0.0}, at, none, 1.0);
    CHECK(std::abs(r.lam3) < 1e-15);
  }
  SUBCASE("equals -d/dq of the Hamiltonian less the obstacle penalties") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TaskSpec task;
    task.obstacles = {{{0.0, 0.0}, 1.0, 3.0}, {{0.5, 0.2}, 0.6, 2.0}};
    task.grasp = GraspObject{{0.2, -0.1}, 0.4, 5.0, 0.4};
    int tested = 0;
    for (int trial = 0; trial < 200 && tested < 100; ++trial) {
      const MaterialPoint point = sample_point(rng, 0.6);
      const StatePoint q{0.6 * u(rng), 0.6 * u(rng), 3.0 * u(rng)};
      // Stay off the kinks so central differences are meaningful.
      bool near_kink = false;
      for (const auto& o : task.obstacles) {
        near_kink |= std::abs(obstacle_constraint(q, point.diameter, o)) < 1e-3;
      }
      near_kink |= grasp_cost(q, *task.grasp) < 1e-3;
      if (near_kink) continue;
      ++tested;
      const CostatePoint lambda{u(rng), u(rng), u(rng)};
      const StrainPoint w{1.0 + 0.3 * u(rng), 0.3 * u(rng), u(rng)};
      auto g = [&](StatePoint p) {
        double value = control_hamiltonian(p, lambda, w, point, task, 1.0);
        for (const auto& o : task.obstacles) value -= o.weight * violation_rhs(p, o, point.diameter);
        return value;
      };
      CostatePoint r = costate_rhs(q, lambda, w, point, task, 1.0);
      const double rhs[3] = {r.lam1, r.lam2, r.lam3};
      const double h = 1e-7;
      for (int i = 0; i < 3; ++i) {
        StatePoint plus = q, minus = q;
        component(plus, i) += h;
        component(minus, i) -= h;
        const double fd = -(g(plus) - g(minus)) / (2.0 * h);
        CHECK(rhs[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-2));
      }
    }
    CHECK(tested == 100);
  }
}

TEST_CASE("transversality") {
  const TaskSpec reach = TaskSpec::reach({0.09, 0.09}, 1e3);
  const CostatePoint at_target = transversality({0.09, 0.09, 0.2}, reach);
  CHECK(at_target.lam1 == 0.0);
  CHECK(at_target.lam2 == 0.0);
  const CostatePoint from_origin = transversality({0.0, 0.0, 0.0}, reach);
  CHECK(from_origin.lam1 == doctest::Approx(90.0));
  CHECK(from_origin.lam2 == doctest::Approx(90.0));
  CHECK(from_origin.lam3 == 0.0);
  const TaskSpec grasp = TaskSpec::grasping({{0.06, 0.03}, 0.04, 1e3, 0.4});
  const CostatePoint none = transversality({0.0, 0.0, 0.0}, grasp);
  CHECK(none.lam1 == 0.0);
  CHECK(none.lam2 == 0.0);
}

TEST_CASE("task validation") {
  TaskSpec bad = TaskSpec::reach({0.1, 0.1});
  bad.target.reset();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  TaskSpec grasp = TaskSpec::grasping({{0.06, 0.03}, 0.04, 1e3, 0.4});
  CHECK_NOTHROW(grasp.validate());
  CHECK(grasp.grasp_weight(0.05, 0.2) == 0.0);
  CHECK(grasp.grasp_weight(0.1, 0.2) == 1e3);
}
