#include <gtest/gtest.h>

#include <cmath>

#include "cfforge/errors.hpp"
#include "cfforge/optimizer.hpp"
#include "cfforge/synth.hpp"

using namespace cfforge;

namespace {

// f -> A with trainable weight w; g -> B frozen at 0. With f = 1, g = 0 the
// metric is (2 - w)^2.
RuleBase one_rule(double w) {
  RuleBase rb;
  rb.propositions = {{"f", PropKind::Input, false},
                     {"g", PropKind::Input, false},
                     {"A", PropKind::Derived, true},
                     {"B", PropKind::Derived, true}};
  Rule a;
  a.id = "a";
  a.antecedent = Expr::leaf("f");
  a.consequent = "A";
  a.weight = w;
  Rule b;
  b.id = "b";
  b.antecedent = Expr::leaf("g");
  b.consequent = "B";
  b.weight = 0.0;
  b.trainable = false;
  rb.rules = {a, b};
  return rb;
}

std::vector<TrainingObject> one_object() { return {{"o", {{"f", 1.0}, {"g", 0.0}}, "A"}}; }

SynthResult small_synth(std::uint64_t seed, double noise = 0.2, int objects = 30) {
  SynthSpec spec;
  spec.objects = objects;
  spec.noise = noise;
  spec.seed = seed;
  return generate(spec);
}

std::vector<double> grad_of(const RuleBase& rb, std::span<const TrainingObject> data, OptimizerConfig cfg,
                            EvaluationBudget* budget_out = nullptr) {
  const RuleGraph g(rb);
  const ClassMarginMetric metric;
  const TrainingProblem problem(g, encode(g, data), metric, cfg.firing, cfg.penalty);
  const std::vector<double> w = rb.weights();
  std::vector<ObjectEvaluation> states;
  problem.evaluate_all(w, states);
  std::vector<std::size_t> all(w.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  EvaluationBudget budget;
  auto grad = gradient(problem, w, states, problem.objective(w, states), all, cfg, budget);
  if (budget_out) *budget_out = budget;
  return grad;
}

}  // namespace

TEST(Gradient, MatchesAnalyticOnOneRule) {
  OptimizerConfig cfg;
  for (double w : {0.0, 0.3, -0.5}) {
    const auto g = grad_of(one_rule(w), one_object(), cfg);
    EXPECT_NEAR(g[0], -2.0 * (2.0 - w), 1e-3);
    EXPECT_EQ(g[1], 0.0);
  }
  cfg.fd_scheme = FdScheme::Central;
  EXPECT_NEAR(grad_of(one_rule(0.0), one_object(), cfg)[0], -4.0, 1e-8);
}

TEST(Gradient, ZeroWhenNothingFires) {
  const std::vector<TrainingObject> data{{"o", {{"f", 0.0}, {"g", 0.0}}, "A"}};
  for (double g : grad_of(one_rule(0.4), data, OptimizerConfig{})) EXPECT_EQ(g, 0.0);
}

TEST(Gradient, IncrementalMatchesFullEvaluation) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SynthResult gen = small_synth(seed);
    OptimizerConfig tms;
    OptimizerConfig naive;
    naive.use_tms = false;
    EvaluationBudget bt;
    EvaluationBudget bn;
    const auto a = grad_of(gen.expert, gen.data, tms, &bt);
    const auto b = grad_of(gen.expert, gen.data, naive, &bn);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-10);
    EXPECT_EQ(bt.evaluations, bn.evaluations);
    EXPECT_LT(bt.gradient_firings, bn.gradient_firings);
  }
}

TEST(Gradient, OneSidedAtTheBoundary) {
  OptimizerConfig cfg;
  cfg.fd_scheme = FdScheme::Central;
  const auto g = grad_of(one_rule(1.0), one_object(), cfg);
  EXPECT_TRUE(std::isfinite(g[0]));
  EXPECT_NEAR(g[0], -2.0, 1e-3);
}

TEST(Train, SoftBoundOptimumOnOneObject) {
  RuleBase rb = one_rule(0.0);
  rb.rules[0].bounds = {0.0, 0.5};
  rb.rules[0].bound_kind = BoundKind::Soft;
  OptimizerConfig cfg;
  cfg.tol_objective = 1e-12;
  cfg.tol_grad = 1e-9;
  const TrainResult r = train(rb, one_object(), ClassMarginMetric{}, cfg);

  // Oracle: golden-section search on (2 - w)^2 + 10 (w - 0.5)_+^2 over [-1, 1].
  auto F = [](double w) { return (2 - w) * (2 - w) + 10 * std::pow(std::max(0.0, w - 0.5), 2); };
  double lo = -1, hi = 1;
  const double phi = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 200; ++i) {
    const double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    (F(x1) < F(x2) ? hi : lo) = F(x1) < F(x2) ? x2 : x1;
  }
  EXPECT_NEAR(lo, 14.0 / 22.0, 1e-6);
  EXPECT_NEAR(r.rules.rules[0].weight, lo, 1e-2);
  EXPECT_EQ(r.rules.rules[1].weight, 0.0);
}

TEST(Train, HardBoundsAreRespectedAndTraceIsMonotone) {
  SynthResult gen = small_synth(4);
  for (auto& r : gen.zero.rules) {
    r.bounds = {-0.5, 0.5};
  }
  OptimizerConfig cfg;
  cfg.max_iters = 50;
  const TrainResult r = train(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  for (const Rule& rule : r.rules.rules) {
    EXPECT_GE(rule.weight, -0.5);
    EXPECT_LE(rule.weight, 0.5);
  }
  double prev = r.trace.initial_objective;
  for (const auto& it : r.trace.iterations) {
    EXPECT_LE(it.objective, prev);
    prev = it.objective;
  }
  EXPECT_LT(r.trace.final_objective(), r.trace.initial_objective);
  EXPECT_TRUE(r.trace.boundary_stall);
}

TEST(Train, FrozenAndTrainOnlyRulesKeepTheirBits) {
  SynthResult gen = small_synth(5);
  gen.expert.rules[0].trainable = false;
  gen.expert.rules[0].weight = 0.123456789;
  OptimizerConfig cfg;
  cfg.max_iters = 20;
  cfg.train_only = std::vector<std::string>{gen.expert.rules[0].id, gen.expert.rules[1].id, gen.expert.rules[2].id};
  const TrainResult r = train(gen.expert, gen.data, ClassMarginMetric{}, cfg);
  EXPECT_EQ(r.trace.trainable.size(), 2u);
  for (std::size_t k = 0; k < r.rules.rules.size(); ++k) {
    if (k == 1 || k == 2) continue;
    EXPECT_EQ(r.rules.rules[k].weight, gen.expert.rules[k].weight) << r.rules.rules[k].id;
  }
  EXPECT_EQ(r.trace.budget.rules, 2u);
}

TEST(Train, Errors) {
  const SynthResult gen = small_synth(6);
  const ClassMarginMetric m;
  EXPECT_THROW(train(gen.expert, std::span<const TrainingObject>{}, m, OptimizerConfig{}), EmptyDataset);
  RuleBase frozen = gen.expert;
  for (auto& r : frozen.rules) r.trainable = false;
  EXPECT_THROW(train(frozen, gen.data, m, OptimizerConfig{}), NoTrainableRules);
  OptimizerConfig cfg;
  cfg.train_only = std::vector<std::string>{"nope"};
  EXPECT_THROW(train(gen.expert, gen.data, m, cfg), UnknownRule);
  cfg = OptimizerConfig{};
  cfg.fd_eps = 0;
  EXPECT_THROW(train(gen.expert, gen.data, m, cfg), std::invalid_argument);
}

TEST(Train, DeterministicAndThreadInvariant) {
  const SynthResult gen = small_synth(7);
  OptimizerConfig cfg;
  cfg.max_iters = 15;
  cfg.multi_start = 3;
  cfg.seed = 11;
  const auto a = train_multi(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  const auto b = train_multi(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  cfg.threads = 4;
  const auto c = train_multi(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  ASSERT_EQ(a.traces.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(a.traces[s].final_weights, b.traces[s].final_weights);
    EXPECT_EQ(a.traces[s].final_weights, c.traces[s].final_weights);
    ASSERT_EQ(a.traces[s].iterations.size(), c.traces[s].iterations.size());
    for (std::size_t i = 0; i < a.traces[s].iterations.size(); ++i)
      EXPECT_EQ(a.traces[s].iterations[i].objective, c.traces[s].iterations[i].objective);
  }
  EXPECT_EQ(a.best.trace.final_weights, a.traces[static_cast<std::size_t>(a.best.trace.best_start)].final_weights);
  EXPECT_NE(a.traces[0].initial_weights, a.traces[1].initial_weights);
}

TEST(Train, SingleStartEqualsTrain) {
  const SynthResult gen = small_synth(8);
  OptimizerConfig cfg;
  cfg.max_iters = 10;
  const auto single = train(gen.expert, gen.data, ClassMarginMetric{}, cfg);
  const auto multi = train_multi(gen.expert, gen.data, ClassMarginMetric{}, cfg);
  EXPECT_EQ(single.trace.final_weights, multi.best.trace.final_weights);
}

TEST(Train, IncrementalAndFullRunsAgree) {
  const SynthResult gen = small_synth(9);
  OptimizerConfig cfg;
  cfg.max_iters = 30;
  const auto a = train(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  cfg.use_tms = false;
  const auto b = train(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  ASSERT_EQ(a.trace.final_weights.size(), b.trace.final_weights.size());
  for (std::size_t k = 0; k < a.trace.final_weights.size(); ++k)
    EXPECT_NEAR(a.trace.final_weights[k], b.trace.final_weights[k], 1e-8);
}

TEST(Train, HoldoutCurveIsRecorded) {
  const SynthResult gen = small_synth(10, 0.3, 60);
  OptimizerConfig cfg;
  cfg.max_iters = 10;
  cfg.holdout_fraction = 0.25;
  cfg.seed = 3;
  const auto r = train(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  ASSERT_TRUE(r.trace.initial_holdout_objective.has_value());
  EXPECT_EQ(r.trace.budget.objects, 45u);
  for (const auto& it : r.trace.iterations) EXPECT_TRUE(it.holdout_objective.has_value());
}

TEST(Audit, StatusByConfiguration) {
  const SynthResult gen = small_synth(11, 0.2, 10);
  OptimizerConfig cfg;
  cfg.max_iters = 3;
  cfg.tol_objective = 0;
  cfg.tol_grad = 0;
  cfg.use_tms = false;
  const auto r = train(gen.zero, gen.data, ClassMarginMetric{}, cfg);
  const auto& b = r.trace.budget;
  EXPECT_EQ(b.objects, 10u);
  EXPECT_EQ(b.rules, 50u);
  EXPECT_EQ(b.evaluations, b.gradients * 10u * 50u);
  EXPECT_EQ(audit_budget(r.trace), AuditStatus::Pass);

  TrainingTrace bad = r.trace;
  bad.budget.evaluations += 1;
  EXPECT_EQ(audit_budget(bad), AuditStatus::Fail);
  bad.config.use_tms = true;
  EXPECT_EQ(audit_budget(bad), AuditStatus::Skipped);
}

TEST(Project, ClampsToFeasibleBox) {
  Rule r;
  r.bounds = {0.0, 0.5};
  EXPECT_EQ(project(r, 0.7), 0.5);
  EXPECT_EQ(project(r, -0.1), 0.0);
  r.bound_kind = BoundKind::Soft;
  EXPECT_EQ(project(r, 0.7), 0.7);
  EXPECT_EQ(project(r, 1.5), 1.0);
}
