#pragma once

// Forward-backward sweep for the static shape problem: integrate the
// kinematics forward from the clamped base, integrate the costate backward
// from the transversality condition, then move the strains along dH^/dw.
//
// The sweeps are the exact discrete adjoint of the staggered midpoint
// discretisation, so dH^/dw on element e equals -(1/ds) dJ/dw_e for the
// discrete objective J.

#include "cosserat/rod_model.hpp"
#include "cosserat/statics_ocp.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cosserat {

enum class SpatialScheme {
  midpoint,  // angle sampled at the element midpoint, second order
  euler,     // angle sampled at the element's proximal node, first order
};

// Metric used to turn dH^/dw into a strain update.
enum class StepMetric {
  gradient,  // w += eta dH^/dw
  newton,    // w += eta (d^2 J)^-1 ds dH^/dw, Levenberg-safeguarded
};

struct SolverConfig {
  double learning_rate = 0.01;
  int max_iter = 6000;
  double grad_tol = 1.0e-8;
  SpatialScheme scheme = SpatialScheme::midpoint;
  StepMetric metric = StepMetric::newton;
  bool backtracking = true;
  int max_backtracks = 40;
  double divergence_factor = 10.0;
  // Half-width of the quadratic blend applied to the kinks of max(Psi, 0)
  // and of the grasp distance, relative to L0^2 and L0 respectively. Zero
  // keeps the exact one-sided penalties.
  double kink_smoothing = 1.0e-6;
  // Iterations between rebuilds of the Newton metric; in between the last
  // factorisation is reused. A step that needs backtracking or a change of
  // the nodes touching an obstacle triggers a rebuild.
  int metric_refresh = 1;

  void validate() const;
};

// Accumulated obstacle violation q^_j(s) on the nodes (trapezoidal rule).
std::vector<Vector> violation_states(const RodState& shape, const TaskSpec& task,
                                     const RodGeometry& geometry);
// Terminal values q^_j(L0).
std::vector<double> performance_indices(const RodState& shape, const TaskSpec& task,
                                        const RodGeometry& geometry);

// Positions/angles of the static shape generated by w (momentum zero).
// Throws SolverDivergence on non-finite output.
RodState forward_sweep(const DeformationField& w, const StatePoint& base,
                       const RodGeometry& geometry,
                       SpatialScheme scheme = SpatialScheme::midpoint);

// Costate on the element midpoints. A positive kink_smoothing integrates the
// costate of the smoothed objective instead.
CostateField backward_sweep(const RodState& shape, const DeformationField& w,
                            const TaskSpec& task, const RodGeometry& geometry,
                            SpatialScheme scheme = SpatialScheme::midpoint,
                            double kink_smoothing = 0.0);

// J = int W + int mu_grasp Phi_grasp + mu_tip Phi_tip + sum_j xi_j q^_j(L0).
double augmented_objective(const RodState& shape, const DeformationField& w,
                           const TaskSpec& task, const RodGeometry& geometry,
                           double kink_smoothing = 0.0);

// dH^/dw on every element.
DeformationField strain_gradient(const RodState& shape, const CostateField& lambda,
                                 const DeformationField& w, const RodGeometry& geometry);

struct SweepStep {
  DeformationField next;
  RodState shape;        // forward sweep of the incoming strains
  CostateField lambda;   // backward sweep of the incoming strains
  double cost = 0.0;     // smoothed J at the incoming strains
  double update_norm = 0.0;  // sup |direction|, i.e. |w_{k+1} - w_k|/eta for a full step
  double step_scale = 1.0;   // fraction of the learning rate accepted by backtracking
  bool stalled = false;      // no accepted step; next == incoming strains
};

// Factorised Newton metric carried between iterations.
struct MetricCache {
  Vector scale;
  Eigen::LLT<Eigen::MatrixXd> factor;
  int age = -1;  // uses since the last rebuild; -1 when empty
  std::vector<bool> band;  // nodes near an obstacle when it was built
};

SweepStep sweep_iteration(const DeformationField& w, const StatePoint& base,
                          const TaskSpec& task, const RodGeometry& geometry,
                          const SolverConfig& config, MetricCache* cache = nullptr);

struct SolveResult {
  DeformationField w_bar;
  RodState q_bar;
  CostateField lambda;
  std::vector<double> cost_history;  // iterations + 1 entries
  bool converged = false;
  int iterations = 0;
};

struct TraceRow {
  int iteration = 0;
  double cost = 0.0;
  double update_norm = 0.0;
  double tip_error = 0.0;
};

// Runs sweep_iterations until the update norm drops below grad_tol or
// max_iter is reached. Throws SolverDivergence if J exceeds
// divergence_factor times its running minimum.
SolveResult solve(const TaskSpec& task, const StatePoint& base, const RodGeometry& geometry,
                  const SolverConfig& config,
                  const std::optional<DeformationField>& initial = std::nullopt,
                  const std::function<void(const TraceRow&)>& trace = {});

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

// One sweep per call against a possibly time-varying task; carries the strain
// iterate between calls of the dynamic simulation.
class OnlineSolver {
 public:
  OnlineSolver(const RodGeometry& geometry, StatePoint base, SolverConfig config,
               std::optional<DeformationField> initial = std::nullopt);

  const DeformationField& step(const TaskSpec& task);

  const DeformationField& current() const { return w_; }
  const RodState& last_shape() const { return last_.shape; }
  double last_cost() const { return last_.cost; }
  double last_update_norm() const { return last_.update_norm; }
  int iterations() const { return iterations_; }

 private:
  const RodGeometry* geometry_;
  StatePoint base_;
  SolverConfig config_;
  DeformationField w_;
  SweepStep last_;
  MetricCache metric_;
  int iterations_ = 0;
};

}  // namespace cosserat
