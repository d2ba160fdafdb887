#include "cosserat/fb_solver.hpp"

#include "cosserat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace cosserat {

namespace {

constexpr double kGraspDistanceFloor = 1.0e-3;

double scheme_offset(SpatialScheme scheme) {
  return scheme == SpatialScheme::midpoint ? 0.5 : 0.0;
}

// Trapezoidal weights for node quadrature.
double node_weight(int i, int elements) { return (i == 0 || i == elements) ? 0.5 : 1.0; }

StatePoint node_state(const RodState& shape, int i) { return {shape.x[i], shape.y[i], 0.0}; }

Vec2 rot90(const Vec2& v) { return {-v.y(), v.x()}; }

// max(v, 0) with a quadratic blend on |v| < width.
double soft_plus(double v, double width) {
  if (v >= width) return v;
  if (v <= -width) return 0.0;
  return (v + width) * (v + width) / (4.0 * width);
}

double soft_plus_slope(double v, double width) {
  if (v >= width) return 1.0;
  if (v <= -width) return 0.0;
  return (v + width) / (2.0 * width);
}

// |v| with a quadratic blend on |v| < width.
double soft_abs(double v, double width) {
  const double a = std::abs(v);
  return a >= width ? a - 0.5 * width : 0.5 * v * v / width;
}

double soft_abs_slope(double v, double width) {
  return std::abs(v) >= width ? (v > 0.0 ? 1.0 : -1.0) : v / width;
}

double smoothed_running_cost(const StatePoint& q, const MaterialPoint& at, const TaskSpec& task,
                             double length, double smoothing) {
  if (smoothing == 0.0) return running_cost(q, at, task, length);
  double cost = 0.0;
  if (task.grasp) {
    const double gap = std::hypot(q.x - task.grasp->center.x(), q.y - task.grasp->center.y()) -
                       0.5 * task.grasp->diameter;
    cost += task.grasp_weight(at.s, length) * soft_abs(gap, smoothing * length);
  }
  for (const auto& obstacle : task.obstacles) {
    cost += obstacle.weight *
            soft_plus(obstacle_constraint(q, at.diameter, obstacle), smoothing * length * length);
  }
  return cost;
}

Vec2 smoothed_running_cost_gradient(const StatePoint& q, const MaterialPoint& at,
                                    const TaskSpec& task, double length, double smoothing) {
  if (smoothing == 0.0) return running_cost_gradient(q, at, task, length);
  Vec2 grad = Vec2::Zero();
  if (task.grasp) {
    const double mu = task.grasp_weight(at.s, length);
    const Vec2 d(q.x - task.grasp->center.x(), q.y - task.grasp->center.y());
    const double dist = d.norm();
    if (mu != 0.0 && dist > 0.0) {
      grad += mu * soft_abs_slope(dist - 0.5 * task.grasp->diameter, smoothing * length) * d /
              dist;
    }
  }
  for (const auto& obstacle : task.obstacles) {
    const double slope = soft_plus_slope(obstacle_constraint(q, at.diameter, obstacle),
                                         smoothing * length * length);
    if (slope != 0.0) grad += obstacle.weight * slope * obstacle_constraint_gradient(q, obstacle);
  }
  return grad;
}

// Newton-type curvature (2x2, lab frame) of the running costs at node i,
// weight included. The kinks get a reweighted quadratic surrogate that
// matches the blend curvature inside the smoothing band.
Eigen::Matrix2d running_cost_curvature(const StatePoint& q, const MaterialPoint& at,
                                       const TaskSpec& task, double length, double smoothing) {
  Eigen::Matrix2d curvature = Eigen::Matrix2d::Zero();
  const Vec2 r(q.x, q.y);
  if (task.grasp) {
    const double mu = task.grasp_weight(at.s, length);
    const Vec2 d = r - task.grasp->center;
    const double dist = d.norm();
    if (mu > 0.0 && dist > 0.0) {
      const Vec2 n = d / dist;
      const double gap = std::abs(dist - 0.5 * task.grasp->diameter);
      const double floor = std::max(kGraspDistanceFloor, smoothing) * length;
      curvature += mu / std::max(gap, floor) * n * n.transpose();
    }
  }
  const double width = std::max(smoothing, 1e-12) * length * length;
  for (const auto& obstacle : task.obstacles) {
    const double psi = obstacle_constraint(q, at.diameter, obstacle);
    if (psi <= -width) continue;
    const Vec2 grad = obstacle_constraint_gradient(q, obstacle);
    curvature += obstacle.weight / std::max(psi, 2.0 * width) * grad * grad.transpose();
  }
  return curvature;
}

// Nodes inside the smoothing band of some obstacle; the metric changes
// qualitatively when this set does.
std::vector<bool> obstacle_band(const RodState& shape, const TaskSpec& task,
                                const RodGeometry& geometry, double smoothing) {
  const int n = geometry.elements();
  const double width = std::max(smoothing, 1e-12) * geometry.length() * geometry.length();
  std::vector<bool> band(n + 1, false);
  for (int i = 0; i <= n; ++i) {
    for (const auto& obstacle : task.obstacles) {
      if (obstacle_constraint(node_state(shape, i), geometry.diameter(geometry.node_s(i)),
                              obstacle) > -width) {
        band[i] = true;
      }
    }
  }
  return band;
}

// d^2 J: Gauss-Newton for the cost terms, exact second-order terms of the
// kinematics, elastic Hessian on the diagonal. Factorised after diagonal
// scaling with a Levenberg shift if needed.
MetricCache build_metric(const RodState& shape, const CostateField& lambda,
                         const DeformationField& w, const TaskSpec& task,
                         const RodGeometry& geometry, double c, double smoothing) {
  const int n = geometry.elements();
  const int dim = 3 * n;
  const double ds = geometry.ds();
  const double length = geometry.length();
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);

  for (int e = 0; e < n; ++e) {
    const auto& sec = geometry.element_section(e);
    hess(3 * e, 3 * e) += ds * sec.EA;
    hess(3 * e + 1, 3 * e + 1) += ds * sec.GA;
    hess(3 * e + 2, 3 * e + 2) += ds * sec.EI;
  }

  std::vector<Vec2> pivot(n);
  for (int e = 0; e < n; ++e) {
    const Vec2 a = shape.node(e);
    const Vec2 b = shape.node(e + 1);
    pivot[e] = b - c * (b - a);
  }

  Eigen::MatrixXd jac(2, dim);
  for (int i = 1; i <= n; ++i) {
    const StatePoint q = node_state(shape, i);
    Eigen::Matrix2d curvature = node_weight(i, n) * ds *
                                running_cost_curvature(q, geometry.node_point(i), task, length, smoothing);
    if (i == n && task.target && task.mu_tip > 0.0) {
      curvature += task.mu_tip * Eigen::Matrix2d::Identity();
    }
    if (curvature.isZero(0.0)) continue;
    const Vec2 ri = shape.node(i);
    for (int e = 0; e < i; ++e) {
      const double ct = std::cos(shape.theta[e]);
      const double st = std::sin(shape.theta[e]);
      jac.col(3 * e) << ds * ct, ds * st;
      jac.col(3 * e + 1) << -ds * st, ds * ct;
      jac.col(3 * e + 2) = ds * rot90(ri - pivot[e]);
    }
    const auto cols = 3 * i;
    const Eigen::MatrixXd jc = jac.leftCols(cols).transpose() * curvature;
    hess.topLeftCorner(cols, cols).noalias() += jc * jac.leftCols(cols);
  }

  // Second-order terms of the kinematics against the internal force.
  std::vector<double> tension(n), n1(n), n2(n);
  for (int e = 0; e < n; ++e) {
    const MaterialLoads loads = to_material_frame(lambda.at(e), shape.theta[e]);
    n1[e] = loads.n1;
    n2[e] = loads.n2;
    tension[e] = loads.n1 * w.nu1[e] + loads.n2 * w.nu2[e];
  }
  std::vector<double> suffix(n + 1, 0.0);
  for (int e = n - 1; e >= 0; --e) suffix[e] = suffix[e + 1] + tension[e];
  const double ds3 = ds * ds * ds;
  for (int b = 0; b < n; ++b) {
    const double tail = suffix[b + 1];
    for (int a = 0; a <= b; ++a) {
      const double value = ds3 * (tail + tension[b] * c * (a < b ? 1.0 : c));
      hess(3 * a + 2, 3 * b + 2) += value;
      if (a != b) hess(3 * b + 2, 3 * a + 2) += value;
    }
  }
  for (int e = 0; e < n; ++e) {
    for (int a = 0; a <= e; ++a) {
      const double dtheta = ds * (a < e ? 1.0 : c);
      const double v1 = -ds * n2[e] * dtheta;
      const double v2 = ds * n1[e] * dtheta;
      hess(3 * a + 2, 3 * e) += v1;
      hess(3 * e, 3 * a + 2) += v1;
      hess(3 * a + 2, 3 * e + 1) += v2;
      hess(3 * e + 1, 3 * a + 2) += v2;
    }
  }

  MetricCache metric;
  metric.scale = hess.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd scaled = metric.scale.asDiagonal() * hess * metric.scale.asDiagonal();
  double shift = 0.0;
  for (int attempt = 0; attempt < 30; ++attempt) {
    metric.factor.compute(scaled);
    if (metric.factor.info() == Eigen::Success) {
      metric.age = 0;
      return metric;
    }
    const double next = shift == 0.0 ? 1e-10 : 10.0 * shift;
    scaled.diagonal().array() += next - shift;
    shift = next;
  }
  throw SolverDivergence("fb_solver: Newton metric is not positive definite");
}

Vector apply_metric(const MetricCache& metric, const Vector& rhs) {
  const Vector direction = metric.scale.cwiseProduct(metric.factor.solve(metric.scale.cwiseProduct(rhs)));
  if (!direction.allFinite()) throw SolverDivergence("fb_solver: non-finite Newton direction");
  return direction;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("solver: learning_rate must be positive");
  if (max_iter < 1) throw ConfigError("solver: max_iter must be at least 1");
  if (!(grad_tol > 0.0)) throw ConfigError("solver: grad_tol must be positive");
  if (max_backtracks < 0) throw ConfigError("solver: max_backtracks must be non-negative");
  if (!(divergence_factor > 1.0)) throw ConfigError("solver: divergence_factor must exceed 1");
  if (!(kink_smoothing >= 0.0)) throw ConfigError("solver: kink_smoothing must be non-negative");
  if (metric_refresh < 1) throw ConfigError("solver: metric_refresh must be at least 1");
}

std::vector<Vector> violation_states(const RodState& shape, const TaskSpec& task,
                                     const RodGeometry& geometry) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  std::vector<Vector> states;
  for (const auto& obstacle : task.obstacles) {
    Vector q_hat = Vector::Zero(n + 1);
    double previous = violation_rhs(node_state(shape, 0), obstacle, geometry.diameter(0.0));
    for (int i = 1; i <= n; ++i) {
      const double current =
          violation_rhs(node_state(shape, i), obstacle, geometry.diameter(geometry.node_s(i)));
      q_hat[i] = q_hat[i - 1] + 0.5 * ds * (previous + current);
      previous = current;
    }
    states.push_back(std::move(q_hat));
  }
  return states;
}

std::vector<double> performance_indices(const RodState& shape, const TaskSpec& task,
                                        const RodGeometry& geometry) {
  std::vector<double> out;
  for (const auto& q_hat : violation_states(shape, task, geometry)) {
    out.push_back(q_hat[q_hat.size() - 1]);
  }
  return out;
}

RodState forward_sweep(const DeformationField& w, const StatePoint& base,
                       const RodGeometry& geometry, SpatialScheme scheme) {
  const int n = geometry.elements();
  w.check(n);
  const double ds = geometry.ds();
  const double c = scheme_offset(scheme);

  RodState shape;
  shape.x.resize(n + 1);
  shape.y.resize(n + 1);
  shape.theta.resize(n);
  shape.px = Vector::Zero(n + 1);
  shape.py = Vector::Zero(n + 1);
  shape.ptheta = Vector::Zero(n);

  shape.x[0] = base.x;
  shape.y[0] = base.y;
  double node_angle = base.theta;
  for (int e = 0; e < n; ++e) {
    const double theta = node_angle + c * ds * w.kappa[e];
    shape.theta[e] = theta;
    const StatePoint f = kinematics_rhs({0.0, 0.0, theta}, w.at(e));
    shape.x[e + 1] = shape.x[e] + ds * f.x;
    shape.y[e + 1] = shape.y[e] + ds * f.y;
    node_angle += ds * w.kappa[e];
  }
  if (!shape.x.allFinite() || !shape.y.allFinite() || !shape.theta.allFinite()) {
    throw SolverDivergence("forward_sweep: non-finite shape");
  }
  return shape;
}

CostateField backward_sweep(const RodState& shape, const DeformationField& w,
                            const TaskSpec& task, const RodGeometry& geometry,
                            SpatialScheme scheme, double kink_smoothing) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  const double c = scheme_offset(scheme);
  const double length = geometry.length();

  CostateField lambda{Vector(n), Vector(n), Vector(n)};
  const CostatePoint terminal = transversality(shape.tip(), task);
  Vec2 force(terminal.lam1, terminal.lam2);
  force -= node_weight(n, n) * ds *
           smoothed_running_cost_gradient(node_state(shape, n), geometry.node_point(n), task, length,
                                          kink_smoothing);
  double couple = terminal.lam3;
  for (int e = n - 1; e >= 0; --e) {
    lambda.lam1[e] = force.x();
    lambda.lam2[e] = force.y();
    const CostatePoint here{force.x(), force.y(), 0.0};
    // d(lam3)/ds = -(nu1 n2 - nu2 n1); the first two rows are the penalties.
    const double rate = costate_rhs({0.0, 0.0, shape.theta[e]}, here, w.at(e),
                                    geometry.element_point(e), TaskSpec{}, length)
                            .lam3;
    lambda.lam3[e] = couple - c * ds * rate;
    couple -= ds * rate;
    force -= node_weight(e, n) * ds *
             smoothed_running_cost_gradient(node_state(shape, e), geometry.node_point(e), task,
                                            length, kink_smoothing);
  }
  if (!lambda.lam1.allFinite() || !lambda.lam2.allFinite() || !lambda.lam3.allFinite()) {
    throw SolverDivergence("backward_sweep: non-finite costate");
  }
  return lambda;
}

double augmented_objective(const RodState& shape, const DeformationField& w,
                           const TaskSpec& task, const RodGeometry& geometry,
                           double kink_smoothing) {
  const int n = geometry.elements();
  const double ds = geometry.ds();
  double cost = total_potential_energy(w, geometry);
  for (int i = 0; i <= n; ++i) {
    cost += node_weight(i, n) * ds *
            smoothed_running_cost(node_state(shape, i), geometry.node_point(i), task,
                                  geometry.length(), kink_smoothing);
  }
  if (task.target) cost += task.mu_tip * phi_tip(shape.tip(), *task.target);
  return cost;
}

DeformationField strain_gradient(const RodState& shape, const CostateField& lambda,
                                 const DeformationField& w, const RodGeometry& geometry) {
  const int n = geometry.elements();
  DeformationField grad = DeformationField::uniform(n, {0.0, 0.0, 0.0});
  for (int e = 0; e < n; ++e) {
    grad.set(e, hamiltonian_strain_gradient({0.0, 0.0, shape.theta[e]}, lambda.at(e), w.at(e),
                                            geometry.element_point(e)));
  }
  return grad;
}

SweepStep sweep_iteration(const DeformationField& w, const StatePoint& base,
                          const TaskSpec& task, const RodGeometry& geometry,
                          const SolverConfig& config, MetricCache* cache) {
  SweepStep step;
  step.shape = forward_sweep(w, base, geometry, config.scheme);
  step.lambda =
      backward_sweep(step.shape, w, task, geometry, config.scheme, config.kink_smoothing);
  step.cost = augmented_objective(step.shape, w, task, geometry, config.kink_smoothing);

  const Vector gradient = strain_gradient(step.shape, step.lambda, w, geometry).packed();
  MetricCache local;
  MetricCache& metric = cache ? *cache : local;
  const std::vector<bool> band =
      config.metric == StepMetric::newton && !task.obstacles.empty()
          ? obstacle_band(step.shape, task, geometry, config.kink_smoothing)
          : std::vector<bool>{};
  auto direction_for = [&](bool rebuild) -> Vector {
    if (config.metric == StepMetric::gradient) return gradient;
    if (rebuild || metric.age < 0 || metric.age >= config.metric_refresh ||
        band != metric.band) {
      metric = build_metric(step.shape, step.lambda, w, task, geometry,
                            scheme_offset(config.scheme), config.kink_smoothing);
      metric.band = band;
    }
    ++metric.age;
    return apply_metric(metric, geometry.ds() * gradient);
  };

  const Vector current = w.packed();
  const double tolerance = 1e-14 * std::max(std::abs(step.cost), 1e-300);
  const bool stale = config.metric == StepMetric::newton && metric.age > 0 &&
                     metric.age < config.metric_refresh && band == metric.band;
  for (int pass = 0; pass < (stale ? 2 : 1); ++pass) {
    const Vector direction = direction_for(pass > 0);
    step.update_norm = direction.lpNorm<Eigen::Infinity>();
    if (step.update_norm == 0.0) {
      step.next = w;
      return step;
    }
    // A reused metric must earn its step without backtracking.
    const int backtracks = (stale && pass == 0) ? 0 : config.max_backtracks;
    double scale = 1.0;
    for (int attempt = 0; attempt <= backtracks; ++attempt, scale *= 0.5) {
      DeformationField trial =
          DeformationField::unpack(current + config.learning_rate * scale * direction);
      if (!(trial.nu1.array() > 0.0).all() || !trial.kappa.allFinite()) continue;
      if (config.backtracking) {
        const RodState trial_shape = forward_sweep(trial, base, geometry, config.scheme);
        const double trial_cost =
            augmented_objective(trial_shape, trial, task, geometry, config.kink_smoothing);
        if (!(trial_cost <= step.cost + tolerance)) continue;
      }
      step.next = std::move(trial);
      step.step_scale = scale;
      return step;
    }
  }
  step.next = w;
  step.step_scale = 0.0;
  step.stalled = true;
  return step;
}

SolveResult solve(const TaskSpec& task, const StatePoint& base, const RodGeometry& geometry,
                  const SolverConfig& config, const std::optional<DeformationField>& initial,
                  const std::function<void(const TraceRow&)>& trace) {
  config.validate();
  task.validate();
  DeformationField w = initial ? *initial : DeformationField::intrinsic(geometry);
  w.check(geometry.elements());

  SolveResult result;
  MetricCache metric;
  double min_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < config.max_iter; ++k) {
    SweepStep step = sweep_iteration(w, base, task, geometry, config, &metric);
    if (!std::isfinite(step.cost)) throw SolverDivergence("fb_solver: non-finite objective");
    result.cost_history.push_back(step.cost);
    min_cost = std::min(min_cost, step.cost);
    const double slack = 1e-12 * std::max(result.cost_history.front(), 1e-300);
    if (step.cost > config.divergence_factor * min_cost && step.cost - min_cost > slack) {
      throw SolverDivergence("fb_solver: objective grew from " + std::to_string(min_cost) +
                             " to " + std::to_string(step.cost) + " at iteration " +
                             std::to_string(k));
    }
    if (trace) {
      const double tip_error =
          task.target ? (*task.target - step.shape.node(geometry.elements())).norm() : 0.0;
      trace({k, step.cost, step.update_norm, tip_error});
    }
    w = std::move(step.next);
    result.iterations = k + 1;
    if (step.update_norm < config.grad_tol) {
      result.converged = true;
      break;
    }
    if (step.stalled) break;
  }

  result.q_bar = forward_sweep(w, base, geometry, config.scheme);
  result.lambda =
      backward_sweep(result.q_bar, w, task, geometry, config.scheme, config.kink_smoothing);
  result.cost_history.push_back(
      augmented_objective(result.q_bar, w, task, geometry, config.kink_smoothing));
  result.w_bar = std::move(w);
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "k,cost,update_norm,tip_error\n";
  char line[160];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", row.iteration, row.cost,
                  row.update_norm, row.tip_error);
    out << line;
  }
}

OnlineSolver::OnlineSolver(const RodGeometry& geometry, StatePoint base, SolverConfig config,
                           std::optional<DeformationField> initial)
    : geometry_(&geometry),
      base_(base),
      config_(config),
      w_(initial ? std::move(*initial) : DeformationField::intrinsic(geometry)) {
  config_.validate();
  w_.check(geometry.elements());
}

const DeformationField& OnlineSolver::step(const TaskSpec& task) {
  last_ = sweep_iteration(w_, base_, task, *geometry_, config_, &metric_);
  w_ = last_.next;
  ++iterations_;
  return w_;
}

}  // namespace cosserat
