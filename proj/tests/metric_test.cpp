#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "cfforge/metric.hpp"
#include "cfforge/synth.hpp"
#include "testing.hpp"

using namespace cfforge;

namespace {

// Each class j has a +1 rule from "pos_j" and a -1 rule from "neg_j", so an
// object's class CFs can be dialled in exactly through its facts.
class Dial {
 public:
  explicit Dial(int classes) : graph_(make(classes)), engine_(graph_) {}

  ObjectEvaluation eval(const std::vector<double>& cfs) const {
    TrainingObject obj{"o", {}, "c0"};
    for (std::size_t j = 0; j < cfs.size(); ++j) {
      obj.facts["pos" + std::to_string(j)] = std::max(cfs[j], 0.0);
      obj.facts["neg" + std::to_string(j)] = std::max(-cfs[j], 0.0);
    }
    return engine_.evaluate_full(encode(graph_, obj), graph_.base().weights());
  }
  std::size_t cls(int j) const { return *graph_.prop_index("c" + std::to_string(j)); }
  const RuleGraph& graph() const { return graph_; }
  const Engine& engine() const { return engine_; }

 private:
  static RuleBase make(int classes) {
    RuleBase rb;
    for (int j = 0; j < classes; ++j) {
      const std::string s = std::to_string(j);
      rb.propositions.push_back({"pos" + s, PropKind::Input, false});
      rb.propositions.push_back({"neg" + s, PropKind::Input, false});
      rb.propositions.push_back({"c" + s, PropKind::Derived, true});
      Rule p;
      p.id = "p" + s;
      p.antecedent = Expr::leaf("pos" + s);
      p.consequent = "c" + s;
      p.weight = 1.0;
      Rule n = p;
      n.id = "n" + s;
      n.antecedent = Expr::leaf("neg" + s);
      n.weight = -1.0;
      rb.rules.push_back(p);
      rb.rules.push_back(n);
    }
    return rb;
  }

  RuleGraph graph_;
  Engine engine_;
};

double margin(const Dial& d, const std::vector<std::vector<double>>& cfs, const std::vector<int>& truth) {
  std::vector<ObjectEvaluation> evals;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < cfs.size(); ++i) {
    evals.push_back(d.eval(cfs[i]));
    labels.push_back(d.cls(truth[i]));
  }
  return class_margin(evals, labels, d.graph().output_classes()).value;
}

Rule soft_rule(double lo, double hi, double w) {
  Rule r;
  r.id = "r";
  r.antecedent = Expr::leaf("f");
  r.consequent = "c";
  r.weight = w;
  r.bounds = {lo, hi};
  r.bound_kind = BoundKind::Soft;
  return r;
}

}  // namespace

TEST(ClassMargin, Examples) {
  const Dial d(2);
  EXPECT_EQ(margin(d, {{1.0, -1.0}}, {0}), 0.0);
  EXPECT_EQ(margin(d, {{0.0, 0.0}}, {0}), 4.0);
  EXPECT_NEAR(margin(d, {{0.3, 0.8}}, {0}), (2.0 + 0.5) * (2.0 + 0.5), 1e-12);

  for (int C : {2, 3, 5}) {
    const Dial dc(C);
    for (int O : {1, 4, 7}) {
      std::vector<std::vector<double>> cfs(static_cast<std::size_t>(O), std::vector<double>(static_cast<std::size_t>(C), 0.0));
      std::vector<int> truth(static_cast<std::size_t>(O));
      for (int i = 0; i < O; ++i) truth[static_cast<std::size_t>(i)] = i % C;
      EXPECT_EQ(margin(dc, cfs, truth), 4.0 * O * (C - 1));
    }
  }
}

TEST(ClassMargin, PerObjectTermsAndUnknownLabel) {
  const Dial d(3);
  std::vector<ObjectEvaluation> evals{d.eval({0.5, 0.1, -0.2}), d.eval({0.0, 0.9, 0.0})};
  std::vector<std::size_t> labels{d.cls(0), d.cls(2)};
  const MetricValue m = class_margin(evals, labels, d.graph().output_classes(), true);
  ASSERT_EQ(m.per_object.size(), 2u);
  EXPECT_EQ(m.value, m.per_object[0] + m.per_object[1]);
  for (double t : m.per_object) {
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 16.0 * 2);
  }
  labels[1] = *d.graph().prop_index("pos0");
  EXPECT_THROW(class_margin(evals, labels, d.graph().output_classes()), UnknownLabel);
}

TEST(ClassMargin, MonotoneInWrongAndTrueClassCfs) {
  const Dial d(3);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> cfs{fixtures::uniform(rng, -1, 1), fixtures::uniform(rng, -1, 1), fixtures::uniform(rng, -1, 1)};
    const double base = margin(d, {cfs}, {0});
    EXPECT_GE(base, 0.0);

    auto lower_wrong = cfs;
    lower_wrong[1] = fixtures::uniform(rng, -1.0, cfs[1]);
    EXPECT_LE(margin(d, {lower_wrong}, {0}), base);

    auto raise_true = cfs;
    raise_true[0] = fixtures::uniform(rng, cfs[0], 1.0);
    EXPECT_LE(margin(d, {raise_true}, {0}), base);
  }
}

TEST(ClassMargin, ZeroOnlyWhenPerfectlySharp) {
  const Dial d(3);
  EXPECT_EQ(margin(d, {{-1.0, 1.0, -1.0}}, {1}), 0.0);
  EXPECT_GT(margin(d, {{-1.0, 1.0, -0.999}}, {1}), 0.0);
  EXPECT_GT(margin(d, {{-1.0, 0.999, -1.0}}, {1}), 0.0);
}

TEST(Penalty, Examples) {
  RuleBase rb;
  rb.propositions = {{"f", PropKind::Input, false}, {"c", PropKind::Derived, true}};
  rb.rules = {soft_rule(0.0, 1.0, 0.5)};
  EXPECT_EQ(penalty(rb, PenaltyConfig{10.0}), 0.0);

  rb.rules[0].weight = -0.2;
  EXPECT_NEAR(penalty(rb, PenaltyConfig{10.0}), 0.4, 1e-15);
  EXPECT_EQ(penalty(rb, PenaltyConfig{0.0}), 0.0);

  rb.rules[0].weight = 0.9;
  rb.rules[0].bounds = {0.0, 0.5};
  EXPECT_NEAR(penalty(rb, PenaltyConfig{2.0}), 2.0 * 0.16, 1e-15);

  rb.rules[0].bound_kind = BoundKind::Hard;
  EXPECT_EQ(penalty(rb, PenaltyConfig{1000.0}), 0.0);
}

TEST(Objective, IsMetricPlusPenalty) {
  const Dial d(2);
  std::vector<ObjectEvaluation> evals{d.eval({0.3, 0.8})};
  std::vector<std::size_t> labels{d.cls(0)};
  const ClassMarginMetric metric;
  const auto& classes = d.graph().output_classes();

  std::vector<Rule> rules{soft_rule(0.0, 1.0, 0.5)};
  std::vector<double> w{0.5};
  EXPECT_EQ(objective(metric, rules, w, evals, labels, classes, PenaltyConfig{10.0}), 6.25);

  w[0] = -0.2;
  EXPECT_EQ(objective(metric, rules, w, evals, labels, classes, PenaltyConfig{0.0}), 6.25);
  EXPECT_NEAR(objective(metric, rules, w, evals, labels, classes, PenaltyConfig{10.0}), 6.25 + 0.4, 1e-12);
}

TEST(Objective, ContinuousInWeightsOnFlatBases) {
  SynthSpec spec;
  spec.objects = 20;
  spec.noise = 0.3;
  const SynthResult gen = generate(spec);
  const RuleGraph g(gen.expert);
  const Engine engine(g);
  const auto objs = encode(g, gen.data);
  std::vector<std::size_t> labels;
  for (const auto& o : objs) labels.push_back(o.label);
  const ClassMarginMetric metric;

  auto F = [&](const std::vector<double>& w) {
    std::vector<ObjectEvaluation> evals;
    for (const auto& o : objs) evals.push_back(engine.evaluate_full(o, w));
    return objective(metric, g.base().rules, w, evals, labels, g.output_classes(), PenaltyConfig{});
  };

  std::mt19937_64 rng(6);
  const std::vector<double> w0 = gen.expert.weights();
  const double f0 = F(w0);
  for (int dir = 0; dir < 10; ++dir) {
    std::vector<double> u(w0.size());
    for (double& x : u) x = fixtures::uniform(rng, -1, 1);
    double prev = std::numeric_limits<double>::infinity();
    for (double h : {1e-2, 1e-4, 1e-6, 1e-8}) {
      std::vector<double> w = w0;
      for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::clamp(w[k] + h * u[k], -1.0, 1.0);
      const double delta = std::abs(F(w) - f0);
      EXPECT_LE(delta, prev * 0.5 + 1e-12);
      prev = delta;
    }
    EXPECT_LT(prev, 1e-5);
  }
}

TEST(Accuracy, Fractions) {
  const Dial d(2);
  std::vector<ObjectEvaluation> evals{d.eval({0.9, 0.1}), d.eval({0.1, 0.9}), d.eval({0.5, 0.2}), d.eval({0.0, 0.0})};
  EXPECT_EQ(accuracy(d.engine(), evals, std::vector<std::size_t>{d.cls(0), d.cls(1), d.cls(0), d.cls(0)}), 1.0);
  EXPECT_EQ(accuracy(d.engine(), evals, std::vector<std::size_t>{d.cls(1), d.cls(0), d.cls(1), d.cls(1)}), 0.0);
  EXPECT_EQ(accuracy(d.engine(), evals, std::vector<std::size_t>{d.cls(0), d.cls(1), d.cls(1), d.cls(0)}), 0.75);
}
