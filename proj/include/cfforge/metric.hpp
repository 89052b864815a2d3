#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cfforge/engine.hpp"
#include "cfforge/rulebase.hpp"

namespace cfforge {

struct MetricValue {
  double value = 0.0;
  std::vector<double> per_object;  // empty unless requested
};

/// Sum over objects i and wrong classes j of (2 + CF_ij - CF_i,true)^2.
///
/// Zero exactly when every object has CF +1 on its true class and -1
/// everywhere else. Each term lies in [0, 16]. Objects are summed in the
/// given order, classes in the given order.
/// Throws UnknownLabel when a label is not one of `classes`.
MetricValue class_margin(std::span<const ObjectEvaluation> evals,
                       std::span<const std::size_t> labels,
                       std::span<const std::size_t> classes,
                       bool per_object = false);

/// Continuous training metric. Implementations must be deterministic and
/// reduce over objects in the order given.
class Metric {
 public:
  virtual ~Metric() = default;
  virtual std::string_view name() const = 0;
  virtual double evaluate(std::span<const ObjectEvaluation> evals,
                          std::span<const std::size_t> labels,
                          std::span<const std::size_t> classes) const = 0;
};

/// The class-margin metric above, as a plug-in.
class ClassMarginMetric final : public Metric {
 public:
  std::string_view name() const override { return "class_margin"; }
  double evaluate(std::span<const ObjectEvaluation> evals, std::span<const std::size_t> labels,
                  std::span<const std::size_t> classes) const override {
    return class_margin(evals, labels, classes).value;
  }
};

struct PenaltyConfig {
  double mu = 10.0;
};

/// mu * sum over soft-bounded rules of max(0, lo - w)^2 + max(0, w - hi)^2.
/// Hard-bounded rules never contribute.
double penalty(const RuleBase& rb, const PenaltyConfig& cfg);
double penalty(std::span<const Rule> rules, std::span<const double> weights,
               const PenaltyConfig& cfg);

/// metric + penalty: what the trainer minimizes.
double objective(const Metric& metric, std::span<const Rule> rules,
                 std::span<const double> weights, std::span<const ObjectEvaluation> evals,
                 std::span<const std::size_t> labels, std::span<const std::size_t> classes,
                 const PenaltyConfig& cfg);

/// Fraction of objects whose argmax class is the label. Reporting only.
double accuracy(const Engine& engine, std::span<const ObjectEvaluation> evals,
                std::span<const std::size_t> labels);

}  // namespace cfforge
