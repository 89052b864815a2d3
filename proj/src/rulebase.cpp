#include "cfforge/rulebase.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <unordered_set>

namespace cfforge {

const Rule* RuleBase::find_rule(std::string_view id) const {
  for (const Rule& r : rules)
    if (r.id == id) return &r;
  return nullptr;
}

Rule* RuleBase::find_rule(std::string_view id) {
  for (Rule& r : rules)
    if (r.id == id) return &r;
  return nullptr;
}

std::vector<double> RuleBase::weights() const {
  std::vector<double> w;
  w.reserve(rules.size());
  for (const Rule& r : rules) w.push_back(r.weight);
  return w;
}

std::string_view to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::DuplicateProposition: return "DuplicateProposition";
    case Violation::Kind::DuplicateRule: return "DuplicateRule";
    case Violation::Kind::UnknownProposition: return "UnknownProposition";
    case Violation::Kind::ConsequentIsInput: return "ConsequentIsInput";
    case Violation::Kind::OutputClassNotDerived: return "OutputClassNotDerived";
    case Violation::Kind::EmptyExpression: return "EmptyExpression";
    case Violation::Kind::CyclicDependency: return "CyclicDependency";
    case Violation::Kind::WeightOutOfRange: return "WeightOutOfRange";
    case Violation::Kind::InvalidBounds: return "InvalidBounds";
    case Violation::Kind::NoOutputClass: return "NoOutputClass";
  }
  return "?";
}

namespace {

std::string join_messages(const std::vector<Violation>& vs) {
  std::string out = "invalid rule base";
  for (const Violation& v : vs) {
    out += "\n  ";
    out += to_string(v.kind);
    out += ": ";
    out += v.message;
  }
  return out;
}

bool well_formed(const Expr& e) {
  switch (e.op) {
    case Expr::Op::Prop: return !e.prop.empty();
    case Expr::Op::Not: return e.children.size() == 1 && well_formed(e.children.front());
    case Expr::Op::And:
    case Expr::Op::Or:
      return !e.children.empty() &&
             std::all_of(e.children.begin(), e.children.end(), well_formed);
  }
  return false;
}

// Rule-to-rule dependency edges: r -> s when s reads r's consequent.
// References that do not resolve are ignored here; validate() reports them.
struct Dependencies {
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::size_t> indegree;
};

Dependencies dependencies(const RuleBase& rb) {
  const std::size_t n = rb.rules.size();
  std::unordered_map<std::string, std::vector<std::size_t>> producers;
  for (std::size_t r = 0; r < n; ++r) producers[rb.rules[r].consequent].push_back(r);

  Dependencies d;
  d.succ.resize(n);
  d.indegree.assign(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    std::unordered_set<std::size_t> seen;
    rb.rules[s].antecedent.visit_props([&](const std::string& p) {
      auto it = producers.find(p);
      if (it == producers.end()) return;
      for (std::size_t r : it->second)
        if (seen.insert(r).second) {
          d.succ[r].push_back(s);
          ++d.indegree[s];
        }
    });
  }
  for (auto& v : d.succ) std::sort(v.begin(), v.end());
  return d;
}

// Returns one cycle as a rule-index path (first == last), or empty.
std::vector<std::size_t> find_cycle(const Dependencies& d) {
  const std::size_t n = d.succ.size();
  enum Color : char { White, Grey, Black };
  std::vector<Color> color(n, White);
  std::vector<std::size_t> stack;

  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    color[u] = Grey;
    stack.push_back(u);
    for (std::size_t v : d.succ[u]) {
      if (color[v] == Grey) {
        auto from = std::find(stack.begin(), stack.end(), v);
        std::vector<std::size_t> cycle(from, stack.end());
        cycle.push_back(v);
        stack = std::move(cycle);
        return true;
      }
      if (color[v] == White && dfs(v)) return true;
    }
    stack.pop_back();
    color[u] = Black;
    return false;
  };

  for (std::size_t u = 0; u < n; ++u)
    if (color[u] == White && dfs(u)) return stack;
  return {};
}

// Kahn's algorithm, smallest rule id first among ready rules.
std::vector<std::size_t> kahn_order(const RuleBase& rb, const Dependencies& d) {
  auto later = [&](std::size_t a, std::size_t b) { return rb.rules[a].id > rb.rules[b].id; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
  std::vector<std::size_t> indegree = d.indegree;
  for (std::size_t r = 0; r < indegree.size(); ++r)
    if (indegree[r] == 0) ready.push(r);

  std::vector<std::size_t> order;
  order.reserve(indegree.size());
  while (!ready.empty()) {
    const std::size_t r = ready.top();
    ready.pop();
    order.push_back(r);
    for (std::size_t s : d.succ[r])
      if (--indegree[s] == 0) ready.push(s);
  }
  return order;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(join_messages(violations)), violations_(std::move(violations)) {}

std::vector<Violation> validate(const RuleBase& rb) {
  using K = Violation::Kind;
  std::vector<Violation> out;

  std::unordered_map<std::string, const Proposition*> props;
  bool any_class = false;
  for (const Proposition& p : rb.propositions) {
    if (!props.emplace(p.id, &p).second)
      out.push_back({K::DuplicateProposition, p.id, "proposition '" + p.id + "' declared twice"});
    if (p.output_class) {
      any_class = true;
      if (p.kind != PropKind::Derived)
        out.push_back({K::OutputClassNotDerived, p.id,
                       "output class '" + p.id + "' must be a derived proposition"});
    }
  }
  if (!any_class) out.push_back({K::NoOutputClass, "", "no output-class proposition declared"});

  std::unordered_set<std::string> rule_ids;
  for (const Rule& r : rb.rules) {
    if (!rule_ids.insert(r.id).second)
      out.push_back({K::DuplicateRule, r.id, "rule '" + r.id + "' declared twice"});

    if (!(r.weight >= -1.0 && r.weight <= 1.0))
      out.push_back({K::WeightOutOfRange, r.id,
                     "rule '" + r.id + "' weight " + std::to_string(r.weight) + " outside [-1, 1]"});

    const Bounds& b = r.bounds;
    if (!(b.lo >= -1.0 && b.hi <= 1.0 && b.lo <= b.hi))
      out.push_back({K::InvalidBounds, r.id, "rule '" + r.id + "' bounds are not a subinterval of [-1, 1]"});

    if (!well_formed(r.antecedent)) {
      out.push_back({K::EmptyExpression, r.id, "rule '" + r.id + "' has an empty or malformed antecedent"});
    } else {
      r.antecedent.visit_props([&](const std::string& p) {
        if (!props.contains(p))
          out.push_back({K::UnknownProposition, r.id,
                         "rule '" + r.id + "' reads undeclared proposition '" + p + "'"});
      });
    }

    auto c = props.find(r.consequent);
    if (c == props.end()) {
      out.push_back({K::UnknownProposition, r.id,
                     "rule '" + r.id + "' concludes undeclared proposition '" + r.consequent + "'"});
    } else if (c->second->kind == PropKind::Input) {
      out.push_back({K::ConsequentIsInput, r.id,
                     "rule '" + r.id + "' concludes input proposition '" + r.consequent + "'"});
    }
  }

  const std::vector<std::size_t> cycle = find_cycle(dependencies(rb));
  if (!cycle.empty()) {
    std::string path;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      if (i) path += " -> ";
      path += rb.rules[cycle[i]].id;
    }
    out.push_back({K::CyclicDependency, path, "cycle " + path});
  }
  return out;
}

std::vector<std::string> topological_order(const RuleBase& rb) {
  const Dependencies d = dependencies(rb);
  const std::vector<std::size_t> order = kahn_order(rb, d);
  if (order.size() != rb.rules.size()) {
    std::vector<Violation> vs;
    for (Violation& v : validate(rb))
      if (v.kind == Violation::Kind::CyclicDependency) vs.push_back(std::move(v));
    throw ValidationError(std::move(vs));
  }
  std::vector<std::string> ids;
  ids.reserve(order.size());
  for (std::size_t r : order) ids.push_back(rb.rules[r].id);
  return ids;
}

std::set<std::string> downstream_closure(const RuleBase& rb, std::string_view rule) {
  std::size_t start = rb.rules.size();
  for (std::size_t r = 0; r < rb.rules.size(); ++r)
    if (rb.rules[r].id == rule) start = r;
  if (start == rb.rules.size()) throw UnknownRule(std::string(rule));

  const Dependencies d = dependencies(rb);
  std::vector<bool> seen(rb.rules.size(), false);
  std::vector<std::size_t> todo{start};
  seen[start] = true;
  std::set<std::string> out;
  while (!todo.empty()) {
    const std::size_t r = todo.back();
    todo.pop_back();
    out.insert(rb.rules[r].id);
    for (std::size_t s : d.succ[r])
      if (!seen[s]) {
        seen[s] = true;
        todo.push_back(s);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------

RuleGraph::RuleGraph(const RuleBase& rb) : base_(rb) {
  if (auto vs = validate(base_); !vs.empty()) throw ValidationError(std::move(vs));

  const std::size_t np = base_.propositions.size();
  const std::size_t nr = base_.rules.size();
  for (std::size_t p = 0; p < np; ++p) prop_index_.emplace(base_.propositions[p].id, p);
  for (std::size_t r = 0; r < nr; ++r) rule_index_.emplace(base_.rules[r].id, r);

  std::function<CompiledExpr(const Expr&)> compile = [&](const Expr& e) {
    CompiledExpr c;
    c.op = e.op;
    if (e.op == Expr::Op::Prop) c.prop = prop_index_.at(e.prop);
    for (const Expr& child : e.children) c.children.push_back(compile(child));
    return c;
  };

  producers_.resize(np);
  consumers_.resize(np);
  antecedents_.reserve(nr);
  consequents_.reserve(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    const Rule& rule = base_.rules[r];
    antecedents_.push_back(compile(rule.antecedent));
    const std::size_t c = prop_index_.at(rule.consequent);
    consequents_.push_back(c);
    producers_[c].push_back(r);
    rule.antecedent.visit_props([&](const std::string& id) {
      auto& cons = consumers_[prop_index_.at(id)];
      if (cons.empty() || cons.back() != r) cons.push_back(r);
    });
  }
  for (auto& ps : producers_)
    std::sort(ps.begin(), ps.end(),
              [&](std::size_t a, std::size_t b) { return base_.rules[a].id < base_.rules[b].id; });
  for (auto& cs : consumers_) {
    std::sort(cs.begin(), cs.end());
    cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
  }

  order_ = kahn_order(base_, dependencies(base_));
  position_.assign(nr, 0);
  for (std::size_t i = 0; i < order_.size(); ++i) position_[order_[i]] = i;

  for (std::size_t p = 0; p < np; ++p)
    if (base_.propositions[p].output_class) classes_.push_back(p);
  std::sort(classes_.begin(), classes_.end(),
            [&](std::size_t a, std::size_t b) { return prop_id(a) < prop_id(b); });
}

std::optional<std::size_t> RuleGraph::prop_index(std::string_view id) const {
  auto it = prop_index_.find(std::string(id));
  if (it == prop_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> RuleGraph::rule_index(std::string_view id) const {
  auto it = rule_index_.find(std::string(id));
  if (it == rule_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> RuleGraph::downstream_closure(std::size_t r) const {
  if (r >= num_rules()) throw UnknownRule(std::to_string(r));
  std::vector<bool> seen(num_rules(), false);
  std::vector<std::size_t> todo{r};
  seen[r] = true;
  std::vector<std::size_t> out;
  while (!todo.empty()) {
    const std::size_t u = todo.back();
    todo.pop_back();
    out.push_back(u);
    for (std::size_t s : consumers_[consequents_[u]])
      if (!seen[s]) {
        seen[s] = true;
        todo.push_back(s);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cfforge
