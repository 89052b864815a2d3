#include "cfforge/synth.hpp"

#include <algorithm>
#include <cstdio>

#include "cfforge/engine.hpp"
#include "random.hpp"

namespace cfforge {

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::Flat: return "flat";
    case Shape::Chain: return "chain";
    case Shape::Tree: return "tree";
  }
  return "?";
}

Shape parse_shape(std::string_view s) {
  if (s == "flat") return Shape::Flat;
  if (s == "chain") return Shape::Chain;
  if (s == "tree") return Shape::Tree;
  throw SpecInvalid("unknown shape '" + std::string(s) + "'");
}

void SynthSpec::check() const {
  if (features < 2) throw SpecInvalid("need at least 2 features");
  if (classes < 2) throw SpecInvalid("need at least 2 classes");
  if (objects < 1) throw SpecInvalid("need at least 1 object");
  if (irrelevant_features < 0 || irrelevant_features >= features)
    throw SpecInvalid("irrelevant features must lie in [0, features)");
  if (features - irrelevant_features < classes)
    throw SpecInvalid("every class needs at least one relevant feature");
  if (!(noise >= 0.0 && noise <= 1.0)) throw SpecInvalid("noise must lie in [0, 1]");
}

namespace {

std::string numbered(char prefix, int i, int count) {
  const int width = static_cast<int>(std::to_string(std::max(count - 1, 0)).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*d", prefix, width, i);
  return buf;
}

constexpr double kOwnWeight = 0.7;
constexpr double kOtherWeight = -0.3;
constexpr int kMaxDraws = 1000;

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  spec.check();
  if (spec.shape != Shape::Flat) throw SpecInvalid("generate() builds flat bases; use generate_shaped()");

  detail::Rng rng(spec.seed);
  const int F = spec.features;
  const int C = spec.classes;

  std::vector<std::string> features, classes;
  for (int f = 0; f < F; ++f) features.push_back(numbered('f', f, F));
  for (int c = 0; c < C; ++c) classes.push_back(numbered('c', c, C));

  // Irrelevant features are a seeded sample; the rest go round-robin to classes.
  std::vector<int> perm(F);
  for (int f = 0; f < F; ++f) perm[f] = f;
  for (int i = F; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<int> owner(F, -1);  // -1: irrelevant
  {
    std::vector<int> relevant(perm.begin() + spec.irrelevant_features, perm.end());
    std::sort(relevant.begin(), relevant.end());
    for (std::size_t k = 0; k < relevant.size(); ++k) owner[relevant[k]] = static_cast<int>(k) % C;
  }

  SynthResult out;
  for (int f = 0; f < F; ++f) {
    if (owner[f] < 0) {
      out.irrelevant.push_back(features[f]);
    } else {
      out.class_features[classes[owner[f]]].push_back(features[f]);
    }
  }

  RuleBase base;
  for (const auto& f : features) base.propositions.push_back({f, PropKind::Input, false});
  for (const auto& c : classes) base.propositions.push_back({c, PropKind::Derived, true});
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c) {
      Rule r;
      r.id = "r_" + features[f] + "_" + classes[c];
      r.antecedent = Expr::leaf(features[f]);
      r.consequent = classes[c];
      base.rules.push_back(std::move(r));
    }

  out.zero = base;
  out.expert = base;
  out.refined = base;
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c) {
      const std::size_t k = static_cast<std::size_t>(f * C + c);
      double expert = 0.0, ideal = 0.0;
      if (owner[f] == c) {
        expert = kOwnWeight;
        ideal = 1.0;
      } else if (owner[f] >= 0) {
        expert = kOtherWeight;
        ideal = -1.0;
      }
      out.expert.rules[k].weight = expert;
      out.refined.rules[k].weight = expert + rng.uniform(0.0, 0.25) * (ideal - expert);
    }

  const RuleGraph graph(out.expert);
  const Engine engine(graph);
  const std::vector<double> expert_w = out.expert.weights();

  for (int i = 0; i < spec.objects; ++i) {
    const int label = i % C;
    TrainingObject obj;
    obj.id = numbered('o', i, spec.objects);
    obj.label = classes[label];

    // Redraw until the expert base classifies the clean object correctly.
    bool separable = false;
    for (int attempt = 0; attempt < kMaxDraws && !separable; ++attempt) {
      obj.facts.clear();
      for (int f = 0; f < F; ++f) {
        double v;
        if (owner[f] < 0) v = rng.uniform(-1.0, 1.0);
        else if (owner[f] == label) v = rng.uniform(0.6, 1.0);
        else v = rng.uniform(-0.2, 0.2);
        obj.facts[features[f]] = v;
      }
      const ObjectEvaluation eval = engine.evaluate_full(encode(graph, obj), expert_w);
      separable = graph.prop_id(engine.classify(eval)) == obj.label;
    }
    if (!separable) throw SpecInvalid("could not draw objects the expert base separates");

    if (rng.bernoulli(spec.noise))
      for (auto& [f, v] : obj.facts) v = std::clamp(v + rng.uniform(-0.4, 0.4), -1.0, 1.0);
    out.data.push_back(std::move(obj));
  }
  return out;
}

ShapedResult generate_shaped(int rules, Shape shape, std::uint64_t seed) {
  if (rules < 1) throw SpecInvalid("need at least one rule");
  if (shape == Shape::Tree && ((rules + 1) & rules) != 0)
    throw SpecInvalid("tree shape needs 2^k - 1 rules");

  detail::Rng rng(seed);
  ShapedResult out;
  RuleBase& rb = out.rules;
  auto add_rule = [&](int i, Expr antecedent, std::string consequent) {
    Rule r;
    r.id = numbered('r', i, rules + 1);
    r.antecedent = std::move(antecedent);
    r.consequent = std::move(consequent);
    r.weight = rng.uniform(0.2, 0.8);
    rb.rules.push_back(std::move(r));
  };

  TrainingObject obj;
  obj.id = "o0";
  obj.label = "c0";

  switch (shape) {
    case Shape::Flat: {
      for (int i = 0; i < rules; ++i) {
        const std::string x = numbered('x', i, rules);
        rb.propositions.push_back({x, PropKind::Input, false});
        obj.facts[x] = 1.0;
      }
      rb.propositions.push_back({"c0", PropKind::Derived, true});
      rb.propositions.push_back({"c1", PropKind::Derived, true});
      for (int i = 0; i < rules; ++i)
        add_rule(i, Expr::leaf(numbered('x', i, rules)), i % 2 == 0 ? "c0" : "c1");
      break;
    }
    case Shape::Chain: {
      rb.propositions.push_back({"x0", PropKind::Input, false});
      obj.facts["x0"] = 1.0;
      for (int i = 1; i < rules; ++i)
        rb.propositions.push_back({numbered('p', i, rules), PropKind::Derived, false});
      rb.propositions.push_back({"c0", PropKind::Derived, true});
      rb.propositions.push_back({"c1", PropKind::Derived, true});
      for (int i = 1; i <= rules; ++i)
        add_rule(i, Expr::leaf(i == 1 ? "x0" : numbered('p', i - 1, rules)),
                 i == rules ? "c0" : numbered('p', i, rules));
      break;
    }
    case Shape::Tree: {
      // Heap numbering: node n has children 2n and 2n + 1.
      for (int n = 1; n <= rules; ++n) {
        if (2 * n > rules) {
          const std::string x = numbered('x', n, rules + 1);
          rb.propositions.push_back({x, PropKind::Input, false});
          obj.facts[x] = 1.0;
        } else {
          rb.propositions.push_back({numbered('q', n, rules + 1), PropKind::Derived, false});
        }
      }
      rb.propositions.push_back({"c0", PropKind::Derived, true});
      rb.propositions.push_back({"c1", PropKind::Derived, true});
      for (int n = 1; n <= rules; ++n) {
        const bool leaf = 2 * n > rules;
        add_rule(n, Expr::leaf(numbered(leaf ? 'x' : 'q', n, rules + 1)),
                 n == 1 ? "c0" : numbered('q', n / 2, rules + 1));
      }
      break;
    }
  }
  out.data.push_back(std::move(obj));
  return out;
}

}  // namespace cfforge
