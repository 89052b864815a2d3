#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfforge/certainty_factor.hpp"

namespace cfforge {

/// Antecedent expression tree over proposition ids.
struct Expr {
  enum class Op { Prop, And, Or, Not };

  Op op = Op::Prop;
  std::string prop;           // Op::Prop only
  std::vector<Expr> children;  // And/Or: >= 1, Not: exactly 1

  static Expr leaf(std::string id) { return Expr{Op::Prop, std::move(id), {}}; }
  static Expr all_of(std::vector<Expr> xs) { return Expr{Op::And, {}, std::move(xs)}; }
  static Expr any_of(std::vector<Expr> xs) { return Expr{Op::Or, {}, std::move(xs)}; }
  static Expr negate(Expr x) { return Expr{Op::Not, {}, {std::move(x)}}; }

  /// Calls `fn` once per proposition reference, in tree order.
  void visit_props(const std::function<void(const std::string&)>& fn) const;

  friend bool operator==(const Expr&, const Expr&) = default;
};

/// Proposition lookup used by eval_expr. Returns nullptr for unbound ids.
using CfLookup = std::function<const CertaintyFactor*(const std::string&)>;

/// AND is the minimum of its members, OR the maximum, NOT the negation.
/// Throws UnboundProposition when a referenced id has no value.
CertaintyFactor eval_expr(const Expr& expr, const CfLookup& env);

}  // namespace cfforge
