#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfforge/errors.hpp"
#include "cfforge/expr.hpp"

namespace cfforge {

enum class PropKind { Input, Derived };
enum class BoundKind { Hard, Soft };

struct Proposition {
  std::string id;
  PropKind kind = PropKind::Input;
  bool output_class = false;

  friend bool operator==(const Proposition&, const Proposition&) = default;
};

struct Bounds {
  double lo = -1.0;
  double hi = 1.0;

  bool contains(double w) const noexcept { return w >= lo && w <= hi; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct Rule {
  std::string id;
  Expr antecedent;
  std::string consequent;
  double weight = 0.0;
  Bounds bounds;
  BoundKind bound_kind = BoundKind::Hard;
  bool trainable = true;

  friend bool operator==(const Rule&, const Rule&) = default;
};

/// Plain data. Use validate() or build a RuleGraph before evaluating.
struct RuleBase {
  std::vector<Proposition> propositions;
  std::vector<Rule> rules;

  const Rule* find_rule(std::string_view id) const;
  Rule* find_rule(std::string_view id);
  std::vector<double> weights() const;

  friend bool operator==(const RuleBase&, const RuleBase&) = default;
};

/// One labelled object: feature-match CFs for input propositions and the
/// id of its true output class. Missing inputs count as CF 0.
struct TrainingObject {
  std::string id;
  std::map<std::string, double> facts;
  std::string label;

  friend bool operator==(const TrainingObject&, const TrainingObject&) = default;
};

struct Violation {
  enum class Kind {
    DuplicateProposition,
    DuplicateRule,
    UnknownProposition,
    ConsequentIsInput,
    OutputClassNotDerived,
    EmptyExpression,
    CyclicDependency,
    WeightOutOfRange,
    InvalidBounds,
    NoOutputClass,
  };

  Kind kind;
  std::string subject;  // offending rule/proposition id, or the cycle for CyclicDependency
  std::string message;
};

std::string_view to_string(Violation::Kind kind);

/// Collects every invariant violation. Empty result means the base is valid.
std::vector<Violation> validate(const RuleBase& rb);

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Rule ids in forward-chaining order. Ties are broken by rule id.
/// Throws ValidationError (CyclicDependency) on a cyclic base.
std::vector<std::string> topological_order(const RuleBase& rb);

/// The rule plus every rule transitively reading one of the closure's
/// consequents. Throws UnknownRule.
std::set<std::string> downstream_closure(const RuleBase& rb, std::string_view rule);

/// Antecedent compiled against proposition indices.
struct CompiledExpr {
  Expr::Op op = Expr::Op::Prop;
  std::size_t prop = 0;
  std::vector<CompiledExpr> children;
};

/// Index-based view of a validated rule base: dependency edges, evaluation
/// order and compiled antecedents. Weights are not part of the graph.
///
/// Rules keep their position from RuleBase::rules as their index.
class RuleGraph {
 public:
  /// Throws ValidationError when `rb` is invalid.
  explicit RuleGraph(const RuleBase& rb);

  const RuleBase& base() const noexcept { return base_; }
  std::size_t num_rules() const noexcept { return base_.rules.size(); }
  std::size_t num_props() const noexcept { return base_.propositions.size(); }

  std::optional<std::size_t> prop_index(std::string_view id) const;
  std::optional<std::size_t> rule_index(std::string_view id) const;
  const std::string& prop_id(std::size_t p) const { return base_.propositions[p].id; }
  const std::string& rule_id(std::size_t r) const { return base_.rules[r].id; }

  const CompiledExpr& antecedent(std::size_t r) const { return antecedents_[r]; }
  std::size_t consequent(std::size_t r) const { return consequents_[r]; }

  /// Rules concluding `p`, sorted by rule id. This is the fold order.
  const std::vector<std::size_t>& producers(std::size_t p) const { return producers_[p]; }
  /// Rules whose antecedent references `p`, sorted by rule index.
  const std::vector<std::size_t>& consumers(std::size_t p) const { return consumers_[p]; }

  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t position(std::size_t r) const { return position_[r]; }

  /// Output-class propositions sorted by id.
  const std::vector<std::size_t>& output_classes() const noexcept { return classes_; }
  bool is_input(std::size_t p) const { return base_.propositions[p].kind == PropKind::Input; }

  std::vector<std::size_t> downstream_closure(std::size_t r) const;

 private:
  RuleBase base_;
  std::unordered_map<std::string, std::size_t> prop_index_;
  std::unordered_map<std::string, std::size_t> rule_index_;
  std::vector<CompiledExpr> antecedents_;
  std::vector<std::size_t> consequents_;
  std::vector<std::vector<std::size_t>> producers_;
  std::vector<std::vector<std::size_t>> consumers_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> position_;
  std::vector<std::size_t> classes_;
};

}  // namespace cfforge
