#include "cfforge/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "parallel.hpp"
#include "random.hpp"

namespace cfforge {

void OptimizerConfig::check() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(fd_eps > 0.0, "fd_eps must be positive");
  require(step_init > 0.0, "step_init must be positive");
  require(shrink > 0.0 && shrink < 1.0, "shrink must lie in (0, 1)");
  require(armijo_c > 0.0 && armijo_c < 1.0, "armijo_c must lie in (0, 1)");
  require(max_backtracks >= 0, "max_backtracks must be non-negative");
  require(max_iters >= 0, "max_iters must be non-negative");
  require(tol_objective >= 0.0 && tol_grad >= 0.0, "tolerances must be non-negative");
  require(tol_window >= 1, "tol_window must be at least 1");
  require(multi_start >= 1, "multi_start must be at least 1");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "holdout_fraction must lie in [0, 1)");
  require(threads >= 1, "threads must be at least 1");
  require(penalty.mu >= 0.0, "penalty coefficient must be non-negative");
  firing.check();
}

std::string_view to_string(FdScheme s) { return s == FdScheme::Forward ? "forward" : "central"; }

FdScheme parse_fd_scheme(std::string_view s) {
  if (s == "forward") return FdScheme::Forward;
  if (s == "central") return FdScheme::Central;
  throw std::invalid_argument("unknown finite-difference scheme '" + std::string(s) + "'");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::ObjectiveTolerance: return "objective_tolerance";
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::LineSearchFailure: return "line_search_failure";
  }
  return "?";
}

StopReason parse_stop_reason(std::string_view s) {
  for (StopReason r : {StopReason::ObjectiveTolerance, StopReason::GradientTolerance,
                       StopReason::MaxIterations, StopReason::LineSearchFailure})
    if (to_string(r) == s) return r;
  throw std::invalid_argument("unknown stop reason '" + std::string(s) + "'");
}

std::string_view to_string(AuditStatus s) {
  switch (s) {
    case AuditStatus::Pass: return "pass";
    case AuditStatus::Fail: return "fail";
    case AuditStatus::Skipped: return "skipped";
  }
  return "?";
}

double project(const Rule& rule, double w) {
  if (rule.bound_kind == BoundKind::Hard)
    return std::clamp(w, std::max(rule.bounds.lo, -1.0), std::min(rule.bounds.hi, 1.0));
  return std::clamp(w, -1.0, 1.0);
}

// ---------------------------------------------------------------------------

TrainingProblem::TrainingProblem(const RuleGraph& graph, std::vector<EncodedObject> objects,
                                 const Metric& metric, FiringPolicy firing, PenaltyConfig penalty)
    : graph_(&graph),
      engine_(graph, firing),
      metric_(&metric),
      penalty_(penalty),
      objects_(std::move(objects)) {
  labels_.reserve(objects_.size());
  for (const EncodedObject& o : objects_) labels_.push_back(o.label);
}

std::uint64_t TrainingProblem::evaluate_all(std::span<const double> weights,
                                            std::vector<ObjectEvaluation>& states,
                                            unsigned threads) const {
  states.resize(objects_.size());
  std::vector<std::uint64_t> fired(objects_.size(), 0);
  detail::parallel_chunks(objects_.size(), threads, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      const std::uint64_t before = states[i].counters().rules_fired;
      engine_.evaluate_full(states[i], objects_[i], weights);
      fired[i] = states[i].counters().rules_fired - before;
    }
  });
  return std::accumulate(fired.begin(), fired.end(), std::uint64_t{0});
}

double TrainingProblem::metric_value(std::span<const ObjectEvaluation> states) const {
  return metric_->evaluate(states, labels_, classes());
}

double TrainingProblem::penalty_value(std::span<const double> weights) const {
  return penalty(graph_->base().rules, weights, penalty_);
}

// ---------------------------------------------------------------------------

namespace {

struct ProbeResult {
  double grad = 0.0;
  std::uint64_t probes = 0;  // objective evaluations at shifted weights
  std::uint64_t fired = 0;
};

// Per-worker scratch for gradient probes.
struct ProbeWorkspace {
  std::vector<double> weights;
  std::vector<ObjectEvaluation>* states = nullptr;  // cached evaluations (TMS path)
  std::vector<ObjectEvaluation> scratch;            // full re-evaluations (naive path)
};

double shifted_objective(const TrainingProblem& problem, std::size_t rule, double value,
                         bool use_tms, ProbeWorkspace& ws, std::uint64_t& fired) {
  const double original = ws.weights[rule];
  ws.weights[rule] = value;
  double f = 0.0;
  if (use_tms) {
    auto& states = *ws.states;
    const Engine& engine = problem.engine();
    for (ObjectEvaluation& s : states) fired += engine.perturb_weight(s, rule, CertaintyFactor(value));
    f = problem.objective(ws.weights, states);
    for (ObjectEvaluation& s : states)
      fired += engine.restore_weight(s, rule, CertaintyFactor(original));
  } else {
    fired += problem.evaluate_all(ws.weights, ws.scratch);
    f = problem.objective(ws.weights, ws.scratch);
  }
  ws.weights[rule] = original;
  return f;
}

ProbeResult probe(const TrainingProblem& problem, std::size_t rule, double f0,
                  const OptimizerConfig& cfg, ProbeWorkspace& ws) {
  ProbeResult out;
  const double w = ws.weights[rule];
  const double eps = cfg.fd_eps * std::max(1.0, std::abs(w));
  const bool up_ok = w + eps <= 1.0;
  const bool down_ok = w - eps >= -1.0;

  auto at = [&](double v) {
    ++out.probes;
    return shifted_objective(problem, rule, v, cfg.use_tms, ws, out.fired);
  };

  if (cfg.fd_scheme == FdScheme::Central && up_ok && down_ok) {
    const double plus = at(w + eps);
    const double minus = at(w - eps);
    out.grad = (plus - minus) / (2.0 * eps);
  } else if (up_ok) {
    out.grad = (at(w + eps) - f0) / eps;
  } else {
    out.grad = (f0 - at(w - eps)) / eps;
  }
  return out;
}

std::vector<std::size_t> trainable_rules(const RuleGraph& graph, const OptimizerConfig& cfg) {
  const auto& rules = graph.base().rules;
  std::vector<bool> allowed(rules.size(), true);
  if (cfg.train_only) {
    std::fill(allowed.begin(), allowed.end(), false);
    for (const std::string& id : *cfg.train_only) {
      auto r = graph.rule_index(id);
      if (!r) throw UnknownRule(id);
      allowed[*r] = true;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < rules.size(); ++r)
    if (allowed[r] && rules[r].trainable) out.push_back(r);
  return out;
}

bool on_bound(const Rule& rule, double w) {
  if (rule.bound_kind == BoundKind::Hard)
    return w == std::max(rule.bounds.lo, -1.0) || w == std::min(rule.bounds.hi, 1.0);
  return w == -1.0 || w == 1.0;
}

}  // namespace

std::vector<double> gradient(const TrainingProblem& problem, std::span<const double> weights,
                             std::vector<ObjectEvaluation>& states, double f0,
                             std::span<const std::size_t> trainable, const OptimizerConfig& cfg,
                             EvaluationBudget& budget) {
  const std::size_t n = trainable.size();
  std::vector<double> g(weights.size(), 0.0);
  std::vector<ProbeResult> results(n);

  // Worker 0 probes the caller's states; the others get private copies,
  // made before any worker starts mutating.
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(cfg.threads, n));
  std::vector<std::vector<ObjectEvaluation>> copies;
  if (cfg.use_tms) copies.assign(workers - 1, states);

  detail::parallel_chunks(n, cfg.threads, [&](std::size_t b, std::size_t e, std::size_t worker) {
    ProbeWorkspace ws;
    ws.weights.assign(weights.begin(), weights.end());
    if (cfg.use_tms) ws.states = worker == 0 ? &states : &copies[worker - 1];
    for (std::size_t k = b; k < e; ++k) results[k] = probe(problem, trainable[k], f0, cfg, ws);
  });

  const std::uint64_t objects = problem.objects().size();
  for (std::size_t k = 0; k < n; ++k) {
    g[trainable[k]] = results[k].grad;
    budget.evaluations += results[k].probes * objects;
    budget.gradient_firings += results[k].fired;
  }
  budget.gradients += 1;
  return g;
}

// ---------------------------------------------------------------------------

TrainResult train(const RuleBase& rb, std::span<const TrainingObject> data, const Metric& metric,
                  const OptimizerConfig& cfg) {
  cfg.check();
  if (data.empty()) throw EmptyDataset();
  const RuleGraph graph(rb);
  const std::vector<std::size_t> trainable = trainable_rules(graph, cfg);
  if (trainable.empty()) throw NoTrainableRules();
  const auto& rules = graph.base().rules;

  // Seeded disjoint split; both halves keep dataset order.
  std::vector<std::size_t> train_idx(data.size());
  std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  std::vector<std::size_t> hold_idx;
  if (cfg.holdout_fraction > 0.0) {
    detail::Rng rng(detail::mix_seed(cfg.seed, 0x401d));
    for (std::size_t i = train_idx.size(); i > 1; --i) std::swap(train_idx[i - 1], train_idx[rng.below(i)]);
    const auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(data.size())));
    hold_idx.assign(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    train_idx.erase(train_idx.begin(), train_idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(hold_idx.begin(), hold_idx.end());
    if (train_idx.empty()) throw EmptyDataset();
  }
  auto encode_subset = [&](const std::vector<std::size_t>& idx) {
    std::vector<EncodedObject> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(encode(graph, data[i]));
    return out;
  };

  const TrainingProblem problem(graph, encode_subset(train_idx), metric, cfg.firing, cfg.penalty);
  const TrainingProblem holdout(graph, encode_subset(hold_idx), metric, cfg.firing, cfg.penalty);
  const bool has_holdout = !hold_idx.empty();

  TrainingTrace trace;
  trace.config = cfg;
  trace.metric_name = std::string(metric.name());
  for (const Rule& r : rules) trace.rule_ids.push_back(r.id);
  for (std::size_t r : trainable) trace.trainable.push_back(rules[r].id);
  trace.budget.objects = problem.objects().size();
  trace.budget.rules = trainable.size();

  std::vector<double> w = rb.weights();
  trace.initial_weights = w;

  std::vector<ObjectEvaluation> states;
  std::vector<ObjectEvaluation> candidate_states;
  std::vector<ObjectEvaluation> holdout_states;
  problem.evaluate_all(w, states, cfg.threads);
  double metric_now = problem.metric_value(states);
  double penalty_now = problem.penalty_value(w);
  double f = metric_now + penalty_now;
  trace.initial_objective = f;
  trace.initial_metric = metric_now;
  trace.initial_penalty = penalty_now;
  auto holdout_objective = [&](std::span<const double> weights) {
    holdout.evaluate_all(weights, holdout_states, cfg.threads);
    return holdout.objective(weights, holdout_states);
  };
  if (has_holdout) trace.initial_holdout_objective = holdout_objective(w);

  trace.stop_reason = StopReason::MaxIterations;
  std::vector<double> candidate(w.size());
  int flat_iterations = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const std::vector<double> g = gradient(problem, w, states, f, trainable, cfg, trace.budget);

    double grad_norm = 0.0;
    double projected_norm = 0.0;
    for (std::size_t r : trainable) {
      grad_norm = std::max(grad_norm, std::abs(g[r]));
      projected_norm = std::max(projected_norm, std::abs(project(rules[r], w[r] - g[r]) - w[r]));
    }
    if (projected_norm < cfg.tol_grad) {
      trace.stop_reason = StopReason::GradientTolerance;
      break;
    }

    // Backtracking along the projected path. Candidates are kept feasible,
    // so the after-step projection is the identity on the accepted point and
    // the Armijo test sees the objective that will be recorded.
    double step = cfg.step_init;
    bool accepted = false;
    int backtracks = 0;
    double f_candidate = f;
    for (; backtracks <= cfg.max_backtracks; ++backtracks, step *= cfg.shrink) {
      candidate = w;
      double predicted = 0.0;
      for (std::size_t r : trainable) {
        candidate[r] = project(rules[r], w[r] - step * g[r]);
        predicted += g[r] * (candidate[r] - w[r]);
      }
      trace.budget.line_search_firings += problem.evaluate_all(candidate, candidate_states, cfg.threads);
      trace.budget.line_search_evaluations += problem.objects().size();
      f_candidate = problem.objective(candidate, candidate_states);
      if (f_candidate <= f + cfg.armijo_c * predicted) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      trace.stop_reason = StopReason::LineSearchFailure;
      break;
    }

    for (std::size_t r : trainable) candidate[r] = project(rules[r], candidate[r]);
    w.swap(candidate);
    states.swap(candidate_states);
    metric_now = problem.metric_value(states);
    penalty_now = problem.penalty_value(w);
    const double f_new = metric_now + penalty_now;

    IterationRecord rec;
    rec.iteration = it;
    rec.objective = f_new;
    rec.metric = metric_now;
    rec.penalty = penalty_now;
    rec.step = step;
    rec.grad_norm = grad_norm;
    rec.projected_grad_norm = projected_norm;
    rec.backtracks = backtracks;
    if (has_holdout) rec.holdout_objective = holdout_objective(w);
    trace.iterations.push_back(rec);

    const double rel = (f - f_new) / std::max(std::abs(f), std::numeric_limits<double>::min());
    f = f_new;
    flat_iterations = rel < cfg.tol_objective ? flat_iterations + 1 : 0;
    if (flat_iterations >= cfg.tol_window) {
      trace.stop_reason = StopReason::ObjectiveTolerance;
      break;
    }
  }

  std::size_t pinned = 0;
  for (std::size_t r : trainable)
    if (on_bound(rules[r], w[r])) ++pinned;
  trace.boundary_stall = 5 * pinned >= trainable.size();
  trace.final_weights = w;

  TrainResult out;
  out.rules = graph.base();
  for (std::size_t r : trainable) out.rules.rules[r].weight = w[r];
  out.trace = std::move(trace);
  return out;
}

MultiStartResult train_multi(const RuleBase& rb, std::span<const TrainingObject> data,
                             const Metric& metric, const OptimizerConfig& cfg) {
  cfg.check();
  const RuleGraph graph(rb);
  const std::vector<std::size_t> trainable = trainable_rules(graph, cfg);

  MultiStartResult out;
  std::vector<StartSummary> summaries;
  int best = -1;
  for (int s = 0; s < cfg.multi_start; ++s) {
    RuleBase start = rb;
    if (s > 0) {
      detail::Rng rng(detail::mix_seed(cfg.seed, 0x5747 + static_cast<std::uint64_t>(s)));
      for (std::size_t r : trainable) {
        Rule& rule = start.rules[r];
        const double lo = std::max(rule.bounds.lo, -1.0);
        const double hi = std::min(rule.bounds.hi, 1.0);
        rule.weight = std::clamp(rule.weight + rng.uniform(-0.3, 0.3), lo, hi);
      }
    }
    TrainResult run = train(start, data, metric, cfg);
    StartSummary sum;
    sum.start = s;
    sum.initial_objective = run.trace.initial_objective;
    sum.final_objective = run.trace.final_objective();
    sum.iterations = static_cast<int>(run.trace.iterations.size());
    sum.stop_reason = run.trace.stop_reason;
    summaries.push_back(sum);
    out.traces.push_back(run.trace);
    if (best < 0 || sum.final_objective < out.best.trace.final_objective()) {
      best = s;
      out.best = std::move(run);
    }
  }
  out.best.trace.starts = summaries;
  out.best.trace.best_start = best;
  return out;
}

AuditStatus audit_budget(const TrainingTrace& trace) {
  if (trace.config.use_tms || trace.config.fd_scheme != FdScheme::Forward) return AuditStatus::Skipped;
  const EvaluationBudget& b = trace.budget;
  return b.evaluations == b.gradients * b.objects * b.rules ? AuditStatus::Pass : AuditStatus::Fail;
}

}  // namespace cfforge
