#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfforge/engine.hpp"
#include "cfforge/metric.hpp"
#include "cfforge/rulebase.hpp"

namespace cfforge {

enum class FdScheme { Forward, Central };

struct OptimizerConfig {
  double fd_eps = 1e-4;
  FdScheme fd_scheme = FdScheme::Forward;
  double step_init = 0.5;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 30;
  int max_iters = 200;
  double tol_objective = 1e-6;  // relative decrease ...
  int tol_window = 3;           // ... sustained for this many iterations
  double tol_grad = 1e-6;
  bool use_tms = true;
  std::uint64_t seed = 0;
  int multi_start = 1;
  double holdout_fraction = 0.0;
  FiringPolicy firing;
  PenaltyConfig penalty;
  /// When set, only these rules (and only if trainable) are optimized.
  std::optional<std::vector<std::string>> train_only;
  /// Worker threads for gradient probes and full evaluations. Results do
  /// not depend on it.
  unsigned threads = 1;

  /// Throws std::invalid_argument on out-of-range settings.
  void check() const;
};

std::string_view to_string(FdScheme s);
FdScheme parse_fd_scheme(std::string_view s);

/// Evaluation accounting. `evaluations` counts one per (rule, object) probe
/// made while computing gradients (two per probe pair for central
/// differences); line-search work is tracked separately.
struct EvaluationBudget {
  std::uint64_t gradients = 0;  // G
  std::uint64_t objects = 0;    // O
  std::uint64_t rules = 0;      // R, trainable rules
  std::uint64_t evaluations = 0;  // N
  std::uint64_t gradient_firings = 0;
  std::uint64_t line_search_evaluations = 0;
  std::uint64_t line_search_firings = 0;
};

enum class StopReason { ObjectiveTolerance, GradientTolerance, MaxIterations, LineSearchFailure };
std::string_view to_string(StopReason r);
StopReason parse_stop_reason(std::string_view s);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double metric = 0.0;
  double penalty = 0.0;
  double step = 0.0;
  double grad_norm = 0.0;            // infinity norm over trainable rules
  double projected_grad_norm = 0.0;  // ignores components pinned at a bound
  int backtracks = 0;
  std::optional<double> holdout_objective;
};

struct StartSummary {
  int start = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  StopReason stop_reason = StopReason::MaxIterations;
};

struct TrainingTrace {
  OptimizerConfig config;
  std::string metric_name;
  double initial_objective = 0.0;
  double initial_metric = 0.0;
  double initial_penalty = 0.0;
  std::optional<double> initial_holdout_objective;
  std::vector<IterationRecord> iterations;  // accepted iterations only
  std::vector<std::string> rule_ids;
  std::vector<double> initial_weights;
  std::vector<double> final_weights;
  std::vector<std::string> trainable;
  EvaluationBudget budget;
  StopReason stop_reason = StopReason::MaxIterations;
  /// Set when at least 20% of trainable weights end on a bound.
  bool boundary_stall = false;
  std::vector<StartSummary> starts;  // filled by train_multi
  int best_start = 0;

  double final_objective() const {
    return iterations.empty() ? initial_objective : iterations.back().objective;
  }
};

/// Everything needed to score a weight vector on a set of objects.
class TrainingProblem {
 public:
  TrainingProblem(const RuleGraph& graph, std::vector<EncodedObject> objects, const Metric& metric,
                  FiringPolicy firing, PenaltyConfig penalty);

  const RuleGraph& graph() const noexcept { return *graph_; }
  const Engine& engine() const noexcept { return engine_; }
  const Metric& metric() const noexcept { return *metric_; }
  const PenaltyConfig& penalty_config() const noexcept { return penalty_; }
  std::span<const EncodedObject> objects() const noexcept { return objects_; }
  std::span<const std::size_t> labels() const noexcept { return labels_; }
  std::span<const std::size_t> classes() const noexcept { return graph_->output_classes(); }

  /// Full pass over every object; returns the number of rule firings.
  std::uint64_t evaluate_all(std::span<const double> weights, std::vector<ObjectEvaluation>& states,
                             unsigned threads = 1) const;
  double metric_value(std::span<const ObjectEvaluation> states) const;
  double penalty_value(std::span<const double> weights) const;
  double objective(std::span<const double> weights, std::span<const ObjectEvaluation> states) const {
    return metric_value(states) + penalty_value(weights);
  }

 private:
  const RuleGraph* graph_;
  Engine engine_;
  const Metric* metric_;
  PenaltyConfig penalty_;
  std::vector<EncodedObject> objects_;
  std::vector<std::size_t> labels_;
};

/// Finite-difference gradient of the objective over the `trainable` rule
/// indices. `states` must hold evaluations of every object under `weights`
/// and `f0` their objective; both are left unchanged. Frozen components are 0.
///
/// With cfg.use_tms each probe perturbs and restores the cached states;
/// otherwise each probe re-evaluates every object from scratch.
std::vector<double> gradient(const TrainingProblem& problem, std::span<const double> weights,
                             std::vector<ObjectEvaluation>& states, double f0,
                             std::span<const std::size_t> trainable, const OptimizerConfig& cfg,
                             EvaluationBudget& budget);

struct TrainResult {
  RuleBase rules;
  TrainingTrace trace;
};

/// Projected steepest descent with backtracking. See README for the loop.
/// Throws EmptyDataset, NoTrainableRules, UnknownRule (bad train_only id).
TrainResult train(const RuleBase& rb, std::span<const TrainingObject> data, const Metric& metric,
                  const OptimizerConfig& cfg);

struct MultiStartResult {
  TrainResult best;
  std::vector<TrainingTrace> traces;
};

/// Runs train() from cfg.multi_start initializations: the declared weights,
/// then seeded uniform offsets in [-0.3, 0.3] on trainable weights. Returns
/// the lowest final objective; ties go to the earlier start.
MultiStartResult train_multi(const RuleBase& rb, std::span<const TrainingObject> data,
                             const Metric& metric, const OptimizerConfig& cfg);

enum class AuditStatus { Pass, Fail, Skipped };
std::string_view to_string(AuditStatus s);

/// Checks N == G * O * R. Only meaningful for full-evaluation runs with
/// forward differences; anything else is Skipped.
AuditStatus audit_budget(const TrainingTrace& trace);

/// Projects `w` onto the feasible box of `rule`: its bounds intersected with
/// [-1, 1] when hard, [-1, 1] alone when soft.
double project(const Rule& rule, double w);

}  // namespace cfforge
