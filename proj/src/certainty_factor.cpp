#include "cfforge/certainty_factor.hpp"

#include <algorithm>

#include "cfforge/errors.hpp"
#include "cfforge/expr.hpp"

namespace cfforge {

namespace {

inline double clamp_unit(double v) noexcept { return std::clamp(v, -1.0, 1.0); }

}  // namespace

double combine_parallel(double x, double y) noexcept {
  // Larger magnitude first: keeps the result symmetric and saturation exact.
  if (x >= 0.0 && y >= 0.0) {
    const double a = std::max(x, y), b = std::min(x, y);
    return clamp_unit(a + b * (1.0 - a));
  }
  if (x <= 0.0 && y <= 0.0) {
    const double a = std::min(x, y), b = std::max(x, y);
    return clamp_unit(a + b * (1.0 + a));
  }
  const double m = std::min(std::abs(x), std::abs(y));
  if (m >= 1.0) return 0.0;  // (1, -1)
  return clamp_unit((x + y) / (1.0 - m));
}

double combine_all(std::span<const double> contributions) noexcept {
  double acc = 0.0;
  for (double c : contributions) acc = combine_parallel(acc, c);
  return acc;
}

CertaintyFactor combine_all(std::span<const CertaintyFactor> contributions) noexcept {
  double acc = 0.0;
  for (CertaintyFactor c : contributions) acc = combine_parallel(acc, c.value());
  return CertaintyFactor::clamped(acc);
}

void Expr::visit_props(const std::function<void(const std::string&)>& fn) const {
  if (op == Op::Prop) {
    fn(prop);
    return;
  }
  for (const Expr& c : children) c.visit_props(fn);
}

CertaintyFactor eval_expr(const Expr& expr, const CfLookup& env) {
  switch (expr.op) {
    case Expr::Op::Prop: {
      const CertaintyFactor* cf = env(expr.prop);
      if (cf == nullptr) throw UnboundProposition(expr.prop);
      return *cf;
    }
    case Expr::Op::Not:
      if (expr.children.size() != 1) throw std::invalid_argument("NOT takes exactly one operand");
      return CertaintyFactor(-eval_expr(expr.children.front(), env).value());
    case Expr::Op::And:
    case Expr::Op::Or: {
      if (expr.children.empty()) throw std::invalid_argument("empty AND/OR");
      double acc = eval_expr(expr.children.front(), env).value();
      for (std::size_t i = 1; i < expr.children.size(); ++i) {
        const double v = eval_expr(expr.children[i], env).value();
        acc = expr.op == Expr::Op::And ? std::min(acc, v) : std::max(acc, v);
      }
      return CertaintyFactor(acc);
    }
  }
  return CertaintyFactor();
}

}  // namespace cfforge
