#pragma once

// The static shape problem posed as an optimal control problem over the
// strains: running/terminal costs, obstacle constraints with their
// accumulated-violation states, the control Hamiltonian and its derivatives.
//
// Sign convention: H = lambda^T f - W and strains maximise H pointwise, while
// the augmented objective J is minimised.

#include "cosserat/rod_model.hpp"

#include <optional>
#include <vector>

namespace cosserat {

struct Obstacle {
  Vec2 center = Vec2::Zero();
  double diameter = 0.0;
  double weight = 1.0e5;  // xi_j, weight of the performance index
};

// Circular object to wrap the distal part of the arm around.
struct GraspObject {
  Vec2 center = Vec2::Zero();
  double diameter = 0.0;
  double weight = 1.0e3;              // amplitude of mu_grasp
  double activation_fraction = 0.4;   // mu_grasp is active on [f L0, L0]
};

struct TaskSpec {
  std::optional<Vec2> target;
  double mu_tip = 1.0e3;
  std::vector<Obstacle> obstacles;
  std::optional<GraspObject> grasp;

  static TaskSpec reach(Vec2 target, double mu_tip = 1.0e3);
  // The grasped object is also registered as an obstacle with weight xi.
  static TaskSpec grasping(const GraspObject& object, double xi = 1.0e5);

  // mu_grasp(s); zero for reaching tasks.
  double grasp_weight(double s, double length) const;

  // Throws std::invalid_argument on negative weights or a combination of
  // tip and grasp objectives.
  void validate() const;
};

// 1/2 |r* - r(L0)|^2; independent of theta.
double phi_tip(const StatePoint& tip, const Vec2& target);

// ((phi_j + phi(s)) / 2)^2 - |r_j - r(s)|^2. Positive means penetration of the
// obstacle inflated by the local rod radius.
double obstacle_constraint(const StatePoint& q, double rod_diameter, const Obstacle& obstacle);
Vec2 obstacle_constraint_gradient(const StatePoint& q, const Obstacle& obstacle);

// Right-hand side of the violation state: max(Psi_j, 0).
double violation_rhs(const StatePoint& q, const Obstacle& obstacle, double rod_diameter);

// Unsigned distance from r to the object boundary | |r - c| - radius |.
double grasp_cost(const StatePoint& q, const GraspObject& object);
// Zero at the centre and on the boundary itself.
Vec2 grasp_cost_gradient(const StatePoint& q, const GraspObject& object);

// d/dr of mu_grasp Phi_grasp + sum_j xi_j c_j at a point; the obstacle term
// uses the one-sided derivative (zero unless Psi_j > 0).
Vec2 running_cost_gradient(const StatePoint& q, const MaterialPoint& at, const TaskSpec& task,
                           double length);
double running_cost(const StatePoint& q, const MaterialPoint& at, const TaskSpec& task,
                    double length);

// H^(s, q, lambda, w) = lambda^T f(q, w) - W(w) - mu_grasp(s) Phi_grasp(q).
double control_hamiltonian(const StatePoint& q, const CostatePoint& lambda,
                           const StrainPoint& w, const MaterialPoint& at,
                           const TaskSpec& task, double length);

// dH^/dw. Vanishes at the pointwise maximiser
//   EA(nu1 - nu1°) = n1, GA(nu2 - nu2°) = n2, EI(kappa - kappa°) = lam3.
StrainPoint hamiltonian_strain_gradient(const StatePoint& q, const CostatePoint& lambda,
                                        const StrainPoint& w, const MaterialPoint& at);

// Closed-form pointwise maximiser of H over w.
StrainPoint maximizing_strain(const StatePoint& q, const CostatePoint& lambda,
                              const MaterialPoint& at);

// d lambda/ds = -dH^/dq + sum_j xi_j dc_j/dq.
CostatePoint costate_rhs(const StatePoint& q, const CostatePoint& lambda,
                         const StrainPoint& w, const MaterialPoint& at, const TaskSpec& task,
                         double length);

// lambda(L0) = -mu_tip dPhi_tip/dq = mu_tip (x* - x, y* - y, 0).
CostatePoint transversality(const StatePoint& tip, const TaskSpec& task);

}  // namespace cosserat
