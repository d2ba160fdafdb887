#pragma once

// Multiple-shooting solve of the unconstrained reaching statics, one shooting
// segment per element. Unknowns are the node states (x, y, theta, couple),
// the element curvatures and the (spatially constant) internal force;
// residuals are segment continuity, the constitutive law, the clamped base
// r(0) = 0, theta(0) = 0 and the free end m(L0) = 0,
// n(L0) = mu_tip (r* - r(L0)).
//
// The discrete stationarity conditions are those of the staggered grid used
// by the sweep solver, so both methods must agree to solver tolerance. The
// soft tip makes the problem multi-branched; the initial shape guess selects
// the branch, loads always start from zero.

#include "cosserat/rod_model.hpp"

namespace oracle {

struct ShootingConfig {
  double offset = 0.5;  // 0.5 midpoint, 0 proximal-node angle sampling
  int max_newton = 200;
  double tolerance = 1e-12;
};

struct ShapeGuess {
  Eigen::VectorXd x, y;   // N + 1 nodes
  Eigen::VectorXd angle;  // N + 1 node angles
};

struct ShootingResult {
  cosserat::DeformationField w;
  Eigen::VectorXd x, y;
  Eigen::Vector2d force = Eigen::Vector2d::Zero();
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
};

ShootingResult shoot_reach(const cosserat::RodGeometry& geometry, const Eigen::Vector2d& target,
                           double mu_tip, const ShapeGuess& guess,
                           const ShootingConfig& config = {});

}  // namespace oracle
