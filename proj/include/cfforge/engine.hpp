#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfforge/certainty_factor.hpp"
#include "cfforge/rulebase.hpp"

namespace cfforge {

/// A rule fires when its antecedent CF is strictly above the threshold.
struct FiringPolicy {
  double threshold = 0.0;

  /// Throws std::invalid_argument unless 0 <= threshold < 1.
  void check() const;
};

/// A training object with facts laid out by proposition index.
struct EncodedObject {
  std::string id;
  std::vector<double> facts;  // one slot per proposition; non-inputs are 0
  std::size_t label = 0;      // proposition index of the true class
};

/// Validates fact keys and the label against `graph`, then lays facts out
/// by index. Throws UnboundProposition for an unknown or non-input fact key,
/// UnknownLabel for a label that is not an output class, and
/// std::out_of_range for a fact outside [-1, 1].
EncodedObject encode(const RuleGraph& graph, const TrainingObject& obj);
std::vector<EncodedObject> encode(const RuleGraph& graph, std::span<const TrainingObject> objs);

struct FireCounters {
  std::uint64_t rules_fired = 0;
  std::uint64_t full_passes = 0;
};

/// Cached inference state for one object. Holds the weights it was computed
/// with, so it stays self-consistent across perturbations.
class ObjectEvaluation {
 public:
  const std::string& object_id() const noexcept { return object_id_; }

  double cf(std::size_t prop) const { return prop_cf_[prop]; }
  std::span<const double> cfs() const noexcept { return prop_cf_; }

  double antecedent_cf(std::size_t rule) const { return antecedent_[rule]; }
  bool fired(std::size_t rule) const { return fired_[rule] != 0; }
  /// 0 when the rule did not fire.
  double contribution(std::size_t rule) const { return contribution_[rule]; }
  double weight(std::size_t rule) const { return weights_[rule]; }

  /// Incoming contributions of `prop` in fold order, as (rule index, CF).
  std::vector<std::pair<std::size_t, double>> contributions(const RuleGraph& graph,
                                                            std::size_t prop) const;

  const FireCounters& counters() const noexcept { return counters_; }

 private:
  friend class Engine;

  std::string object_id_;
  std::vector<double> prop_cf_;
  std::vector<double> antecedent_;
  std::vector<double> contribution_;
  std::vector<std::uint8_t> fired_;
  std::vector<double> weights_;
  FireCounters counters_;

  // Scratch for incremental propagation, keyed by topological position.
  std::vector<std::size_t> heap_;
  std::vector<std::uint8_t> queued_;
};

/// Forward-chaining evaluator over a RuleGraph.
///
/// evaluate_full runs every rule once in topological order. perturb_weight
/// changes one weight and re-fires only the rules whose inputs actually moved,
/// walking the rule's downstream closure in topological order; a branch stops
/// once its proposition CF moves by less than kCutoff.
///
/// Both paths fold a proposition's contributions in the same order, so for
/// the same weights they produce the same CFs.
class Engine {
 public:
  static constexpr double kCutoff = 1e-15;

  explicit Engine(const RuleGraph& graph, FiringPolicy policy = {});

  const RuleGraph& graph() const noexcept { return *graph_; }
  const FiringPolicy& policy() const noexcept { return policy_; }

  ObjectEvaluation evaluate_full(const EncodedObject& obj, std::span<const double> weights) const;
  /// Re-evaluates into an existing state, keeping its counters and buffers.
  void evaluate_full(ObjectEvaluation& state, const EncodedObject& obj,
                     std::span<const double> weights) const;

  /// Returns the number of rules that fired during the update.
  /// Throws InconsistentState if `state` does not match this graph or its
  /// stored contributions no longer refold to the stored CFs.
  std::size_t perturb_weight(ObjectEvaluation& state, std::size_t rule,
                             CertaintyFactor new_weight) const;
  std::size_t perturb_weight(ObjectEvaluation& state, std::string_view rule,
                             CertaintyFactor new_weight) const;

  /// Same contract as perturb_weight; named for the undo half of a probe.
  std::size_t restore_weight(ObjectEvaluation& state, std::size_t rule,
                             CertaintyFactor old_weight) const {
    return perturb_weight(state, rule, old_weight);
  }

  /// Output class with the highest CF; ties go to the smallest class id.
  std::size_t classify(const ObjectEvaluation& state) const;

  /// Throws InconsistentState unless every derived proposition's CF equals
  /// the fold of its stored contributions.
  void check_consistency(const ObjectEvaluation& state) const;

 private:
  double eval(const CompiledExpr& e, std::span<const double> cf) const;
  double refold(const ObjectEvaluation& state, std::size_t prop) const;
  void check_shape(const ObjectEvaluation& state) const;

  const RuleGraph* graph_;
  FiringPolicy policy_;
};

}  // namespace cfforge
