#include "cfforge/metric.hpp"

#include <algorithm>

namespace cfforge {

MetricValue class_margin(std::span<const ObjectEvaluation> evals, std::span<const std::size_t> labels,
                       std::span<const std::size_t> classes, bool per_object) {
  if (labels.size() != evals.size())
    throw std::invalid_argument("one label per evaluation required");
  MetricValue out;
  if (per_object) out.per_object.reserve(evals.size());
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const std::size_t truth = labels[i];
    if (std::find(classes.begin(), classes.end(), truth) == classes.end())
      throw UnknownLabel(std::to_string(truth));
    const double cf_true = evals[i].cf(truth);
    double term = 0.0;
    for (std::size_t j : classes) {
      if (j == truth) continue;
      const double d = 2.0 + (evals[i].cf(j) - cf_true);
      term += d * d;
    }
    out.value += term;
    if (per_object) out.per_object.push_back(term);
  }
  return out;
}

double penalty(std::span<const Rule> rules, std::span<const double> weights,
               const PenaltyConfig& cfg) {
  if (rules.size() != weights.size()) throw std::invalid_argument("weight vector does not match rules");
  double sum = 0.0;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (rules[r].bound_kind != BoundKind::Soft) continue;
    const double below = std::max(0.0, rules[r].bounds.lo - weights[r]);
    const double above = std::max(0.0, weights[r] - rules[r].bounds.hi);
    sum += below * below + above * above;
  }
  return cfg.mu * sum;
}

double penalty(const RuleBase& rb, const PenaltyConfig& cfg) {
  const std::vector<double> w = rb.weights();
  return penalty(rb.rules, w, cfg);
}

double objective(const Metric& metric, std::span<const Rule> rules, std::span<const double> weights,
                 std::span<const ObjectEvaluation> evals, std::span<const std::size_t> labels,
                 std::span<const std::size_t> classes, const PenaltyConfig& cfg) {
  return metric.evaluate(evals, labels, classes) + penalty(rules, weights, cfg);
}

double accuracy(const Engine& engine, std::span<const ObjectEvaluation> evals,
                std::span<const std::size_t> labels) {
  if (labels.size() != evals.size())
    throw std::invalid_argument("one label per evaluation required");
  if (evals.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < evals.size(); ++i)
    if (engine.classify(evals[i]) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(evals.size());
}

}  // namespace cfforge
