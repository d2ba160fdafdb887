#include "cosserat/statics_ocp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cosserat {

TaskSpec TaskSpec::reach(Vec2 target, double mu_tip) {
  TaskSpec task;
  task.target = target;
  task.mu_tip = mu_tip;
  return task;
}

TaskSpec TaskSpec::grasping(const GraspObject& object, double xi) {
  TaskSpec task;
  task.mu_tip = 0.0;
  task.grasp = object;
  task.obstacles.push_back({object.center, object.diameter, xi});
  return task;
}

double TaskSpec::grasp_weight(double s, double length) const {
  if (!grasp) return 0.0;
  return s >= grasp->activation_fraction * length - 1e-12 * length ? grasp->weight : 0.0;
}

void TaskSpec::validate() const {
  if (!(mu_tip >= 0.0)) throw std::invalid_argument("task: mu_tip must be non-negative");
  if (mu_tip > 0.0 && !target) throw std::invalid_argument("task: mu_tip > 0 requires a target");
  for (const auto& obstacle : obstacles) {
    if (!(obstacle.diameter > 0.0)) {
      throw std::invalid_argument("task: obstacle diameter must be positive");
    }
    if (!(obstacle.weight > 0.0)) {
      throw std::invalid_argument("task: obstacle weight xi must be positive");
    }
  }
  if (grasp) {
    if (!(grasp->diameter > 0.0)) {
      throw std::invalid_argument("task: grasp object diameter must be positive");
    }
    if (!(grasp->weight >= 0.0)) {
      throw std::invalid_argument("task: mu_grasp must be non-negative");
    }
    if (!(grasp->activation_fraction >= 0.0 && grasp->activation_fraction <= 1.0)) {
      throw std::invalid_argument("task: grasp activation fraction must lie in [0, 1]");
    }
    if (mu_tip != 0.0) {
      throw std::invalid_argument("task: grasping tasks require mu_tip = 0");
    }
  }
}

double phi_tip(const StatePoint& tip, const Vec2& target) {
  const double dx = target.x() - tip.x;
  const double dy = target.y() - tip.y;
  return 0.5 * (dx * dx + dy * dy);
}

double obstacle_constraint(const StatePoint& q, double rod_diameter, const Obstacle& obstacle) {
  const double reach = 0.5 * (obstacle.diameter + rod_diameter);
  const double dx = obstacle.center.x() - q.x;
  const double dy = obstacle.center.y() - q.y;
  return reach * reach - (dx * dx + dy * dy);
}

Vec2 obstacle_constraint_gradient(const StatePoint& q, const Obstacle& obstacle) {
  return 2.0 * Vec2(obstacle.center.x() - q.x, obstacle.center.y() - q.y);
}

double violation_rhs(const StatePoint& q, const Obstacle& obstacle, double rod_diameter) {
  return std::max(obstacle_constraint(q, rod_diameter, obstacle), 0.0);
}

double grasp_cost(const StatePoint& q, const GraspObject& object) {
  const double r = std::hypot(q.x - object.center.x(), q.y - object.center.y());
  return std::abs(r - 0.5 * object.diameter);
}

Vec2 grasp_cost_gradient(const StatePoint& q, const GraspObject& object) {
  const Vec2 d(q.x - object.center.x(), q.y - object.center.y());
  const double r = d.norm();
  const double gap = r - 0.5 * object.diameter;
  if (r == 0.0 || gap == 0.0) return Vec2::Zero();
  return (gap > 0.0 ? 1.0 : -1.0) * d / r;
}

double running_cost(const StatePoint& q, const MaterialPoint& at, const TaskSpec& task,
                    double length) {
  double cost = 0.0;
  if (task.grasp) cost += task.grasp_weight(at.s, length) * grasp_cost(q, *task.grasp);
  for (const auto& obstacle : task.obstacles) {
    cost += obstacle.weight * violation_rhs(q, obstacle, at.diameter);
  }
  return cost;
}

Vec2 running_cost_gradient(const StatePoint& q, const MaterialPoint& at, const TaskSpec& task,
                           double length) {
  Vec2 grad = Vec2::Zero();
  if (task.grasp) {
    const double mu = task.grasp_weight(at.s, length);
    if (mu != 0.0) grad += mu * grasp_cost_gradient(q, *task.grasp);
  }
  for (const auto& obstacle : task.obstacles) {
    if (obstacle_constraint(q, at.diameter, obstacle) > 0.0) {
      grad += obstacle.weight * obstacle_constraint_gradient(q, obstacle);
    }
  }
  return grad;
}

double control_hamiltonian(const StatePoint& q, const CostatePoint& lambda,
                           const StrainPoint& w, const MaterialPoint& at,
                           const TaskSpec& task, double length) {
  const StatePoint f = kinematics_rhs(q, w);
  double h = lambda.lam1 * f.x + lambda.lam2 * f.y + lambda.lam3 * f.theta -
             stored_energy_density(w, at.intrinsic, at.stiffness);
  if (task.grasp) h -= task.grasp_weight(at.s, length) * grasp_cost(q, *task.grasp);
  return h;
}

StrainPoint hamiltonian_strain_gradient(const StatePoint& q, const CostatePoint& lambda,
                                        const StrainPoint& w, const MaterialPoint& at) {
  const MaterialLoads n = to_material_frame(lambda, q.theta);
  const MaterialLoads dw = constitutive_map(w, at.intrinsic, at.stiffness);
  return {n.n1 - dw.n1, n.n2 - dw.n2, n.m - dw.m};
}

StrainPoint maximizing_strain(const StatePoint& q, const CostatePoint& lambda,
                              const MaterialPoint& at) {
  const MaterialLoads n = to_material_frame(lambda, q.theta);
  const auto& k = at.stiffness;
  return {at.intrinsic.nu1 + n.n1 / k.EA, at.intrinsic.nu2 + n.n2 / k.GA,
          at.intrinsic.kappa + n.m / k.EI};
}

CostatePoint costate_rhs(const StatePoint& q, const CostatePoint& lambda,
                         const StrainPoint& w, const MaterialPoint& at, const TaskSpec& task,
                         double length) {
  const MaterialLoads n = to_material_frame(lambda, q.theta);
  const Vec2 penalty = running_cost_gradient(q, at, task, length);
  return {penalty.x(), penalty.y(), -(w.nu1 * n.n2 - w.nu2 * n.n1)};
}

CostatePoint transversality(const StatePoint& tip, const TaskSpec& task) {
  if (!task.target || task.mu_tip == 0.0) return {};
  return {task.mu_tip * (task.target->x() - tip.x), task.mu_tip * (task.target->y() - tip.y),
          0.0};
}

}  // namespace cosserat
