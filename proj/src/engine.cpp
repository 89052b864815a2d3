#include "cfforge/engine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace cfforge {

void FiringPolicy::check() const {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw std::invalid_argument("firing threshold must lie in [0, 1)");
}

EncodedObject encode(const RuleGraph& graph, const TrainingObject& obj) {
  EncodedObject out;
  out.id = obj.id;
  out.facts.assign(graph.num_props(), 0.0);
  for (const auto& [key, value] : obj.facts) {
    auto p = graph.prop_index(key);
    if (!p || !graph.is_input(*p)) throw UnboundProposition(key);
    out.facts[*p] = CertaintyFactor(value).value();
  }
  auto label = graph.prop_index(obj.label);
  const auto& classes = graph.output_classes();
  if (!label || std::find(classes.begin(), classes.end(), *label) == classes.end())
    throw UnknownLabel(obj.label);
  out.label = *label;
  return out;
}

std::vector<EncodedObject> encode(const RuleGraph& graph, std::span<const TrainingObject> objs) {
  std::vector<EncodedObject> out;
  out.reserve(objs.size());
  for (const TrainingObject& o : objs) out.push_back(encode(graph, o));
  return out;
}

std::vector<std::pair<std::size_t, double>> ObjectEvaluation::contributions(
    const RuleGraph& graph, std::size_t prop) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t r : graph.producers(prop))
    if (fired_[r]) out.emplace_back(r, contribution_[r]);
  return out;
}

Engine::Engine(const RuleGraph& graph, FiringPolicy policy) : graph_(&graph), policy_(policy) {
  policy_.check();
}

double Engine::eval(const CompiledExpr& e, std::span<const double> cf) const {
  switch (e.op) {
    case Expr::Op::Prop: return cf[e.prop];
    case Expr::Op::Not: return -eval(e.children.front(), cf);
    case Expr::Op::And: {
      double v = eval(e.children.front(), cf);
      for (std::size_t i = 1; i < e.children.size(); ++i) v = std::min(v, eval(e.children[i], cf));
      return v;
    }
    case Expr::Op::Or: {
      double v = eval(e.children.front(), cf);
      for (std::size_t i = 1; i < e.children.size(); ++i) v = std::max(v, eval(e.children[i], cf));
      return v;
    }
  }
  return 0.0;
}

double Engine::refold(const ObjectEvaluation& state, std::size_t prop) const {
  double acc = 0.0;
  for (std::size_t r : graph_->producers(prop))
    if (state.fired_[r]) acc = combine_parallel(acc, state.contribution_[r]);
  return acc;
}

ObjectEvaluation Engine::evaluate_full(const EncodedObject& obj,
                                       std::span<const double> weights) const {
  ObjectEvaluation state;
  evaluate_full(state, obj, weights);
  return state;
}

void Engine::evaluate_full(ObjectEvaluation& state, const EncodedObject& obj,
                           std::span<const double> weights) const {
  const RuleGraph& g = *graph_;
  const std::size_t nr = g.num_rules();
  const std::size_t np = g.num_props();
  if (weights.size() != nr) throw std::invalid_argument("weight vector does not match rule count");
  if (obj.facts.size() != np) throw std::invalid_argument("object is not encoded for this rule base");

  state.object_id_ = obj.id;
  state.prop_cf_.assign(np, 0.0);
  for (std::size_t p = 0; p < np; ++p)
    if (g.is_input(p)) state.prop_cf_[p] = obj.facts[p];
  state.antecedent_.assign(nr, 0.0);
  state.contribution_.assign(nr, 0.0);
  state.fired_.assign(nr, 0);
  state.weights_.resize(nr);
  for (std::size_t r = 0; r < nr; ++r) state.weights_[r] = CertaintyFactor(weights[r]).value();
  state.queued_.assign(nr, 0);
  state.heap_.clear();

  // A proposition is folded once its last producer has run.
  std::vector<std::size_t> pending(np);
  for (std::size_t p = 0; p < np; ++p) pending[p] = g.producers(p).size();

  std::uint64_t fired = 0;
  for (std::size_t r : g.order()) {
    const double a = eval(g.antecedent(r), state.prop_cf_);
    state.antecedent_[r] = a;
    if (a > policy_.threshold) {
      state.fired_[r] = 1;
      state.contribution_[r] = state.weights_[r] * a;
      ++fired;
    }
    const std::size_t c = g.consequent(r);
    if (--pending[c] == 0) state.prop_cf_[c] = refold(state, c);
  }
  state.counters_.rules_fired += fired;
  state.counters_.full_passes += 1;
}

void Engine::check_shape(const ObjectEvaluation& state) const {
  if (state.prop_cf_.size() != graph_->num_props() || state.weights_.size() != graph_->num_rules() ||
      state.queued_.size() != graph_->num_rules())
    throw InconsistentState("evaluation state does not belong to this rule base");
}

std::size_t Engine::perturb_weight(ObjectEvaluation& state, std::string_view rule,
                                   CertaintyFactor new_weight) const {
  auto r = graph_->rule_index(rule);
  if (!r) throw UnknownRule(std::string(rule));
  return perturb_weight(state, *r, new_weight);
}

std::size_t Engine::perturb_weight(ObjectEvaluation& state, std::size_t rule,
                                   CertaintyFactor new_weight) const {
  const RuleGraph& g = *graph_;
  if (rule >= g.num_rules()) throw UnknownRule(std::to_string(rule));
  check_shape(state);
  const std::size_t head = g.consequent(rule);
  if (refold(state, head) != state.prop_cf_[head])
    throw InconsistentState("stored contributions of '" + g.prop_id(head) +
                            "' do not refold to its CF");

  state.weights_[rule] = new_weight.value();

  auto after = std::greater<>();
  auto push = [&](std::size_t r) {
    state.queued_[r] = 1;
    state.heap_.push_back(g.position(r));
    std::push_heap(state.heap_.begin(), state.heap_.end(), after);
  };
  push(rule);

  std::size_t fired = 0;
  while (!state.heap_.empty()) {
    std::pop_heap(state.heap_.begin(), state.heap_.end(), after);
    const std::size_t r = g.order()[state.heap_.back()];
    state.heap_.pop_back();
    state.queued_[r] = 0;

    const double a = eval(g.antecedent(r), state.prop_cf_);
    state.antecedent_[r] = a;
    if (a > policy_.threshold) {
      state.fired_[r] = 1;
      state.contribution_[r] = state.weights_[r] * a;
      ++fired;
    } else {
      state.fired_[r] = 0;
      state.contribution_[r] = 0.0;
    }

    const std::size_t c = g.consequent(r);
    const double before = state.prop_cf_[c];
    const double now = refold(state, c);
    state.prop_cf_[c] = now;
    if (std::abs(now - before) >= kCutoff)
      for (std::size_t s : g.consumers(c))
        if (!state.queued_[s]) push(s);
  }
  state.counters_.rules_fired += fired;
  return fired;
}

std::size_t Engine::classify(const ObjectEvaluation& state) const {
  const auto& classes = graph_->output_classes();
  if (classes.empty()) throw NoOutputClasses();
  std::size_t best = classes.front();
  for (std::size_t c : classes)
    if (state.prop_cf_[c] > state.prop_cf_[best]) best = c;
  return best;
}

void Engine::check_consistency(const ObjectEvaluation& state) const {
  check_shape(state);
  for (std::size_t p = 0; p < graph_->num_props(); ++p) {
    if (graph_->is_input(p)) continue;
    if (refold(state, p) != state.prop_cf_[p])
      throw InconsistentState("stored contributions of '" + graph_->prop_id(p) +
                              "' do not refold to its CF");
  }
}

}  // namespace cfforge
