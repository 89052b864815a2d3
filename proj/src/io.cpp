#include "cfforge/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace cfforge {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path, std::string("missing field '") + key + "'");
  return *it;
}

std::string string_at(const json& v, const std::string& path) {
  if (!v.is_string()) throw ParseError(path, "expected a string");
  return v.get<std::string>();
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path, "expected a number");
  return v.get<double>();
}

bool bool_at(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ParseError(path, "expected a boolean");
  return v.get<bool>();
}

Expr expr_from_json(const json& v, const std::string& path) {
  if (v.is_string()) return Expr::leaf(v.get<std::string>());
  if (!v.is_object() || v.size() != 1)
    throw ParseError(path, "expected a proposition id or a single-key {and|or|not} object");
  const auto& [key, body] = *v.items().begin();
  const std::string sub = path + "." + key;
  if (key == "not") return Expr::negate(expr_from_json(body, sub));
  if (key != "and" && key != "or") throw ParseError(path, "unknown operator '" + key + "'");
  if (!body.is_array() || body.empty()) throw ParseError(sub, "expected a non-empty array");
  std::vector<Expr> kids;
  for (std::size_t i = 0; i < body.size(); ++i)
    kids.push_back(expr_from_json(body[i], sub + "[" + std::to_string(i) + "]"));
  return key == "and" ? Expr::all_of(std::move(kids)) : Expr::any_of(std::move(kids));
}

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(where, e.what());
  }
}

}  // namespace

json to_json(const Expr& e) {
  switch (e.op) {
    case Expr::Op::Prop: return e.prop;
    case Expr::Op::Not: return json{{"not", to_json(e.children.front())}};
    case Expr::Op::And:
    case Expr::Op::Or: {
      json arr = json::array();
      for (const Expr& c : e.children) arr.push_back(to_json(c));
      return json{{e.op == Expr::Op::And ? "and" : "or", arr}};
    }
  }
  return nullptr;
}

json to_json(const RuleBase& rb) {
  json props = json::array();
  for (const Proposition& p : rb.propositions)
    props.push_back({{"id", p.id},
                     {"kind", p.kind == PropKind::Input ? "input" : "derived"},
                     {"output_class", p.output_class}});
  json rules = json::array();
  for (const Rule& r : rb.rules)
    rules.push_back({{"id", r.id},
                     {"if", to_json(r.antecedent)},
                     {"then", r.consequent},
                     {"weight", r.weight},
                     {"bounds", {r.bounds.lo, r.bounds.hi}},
                     {"bound_kind", r.bound_kind == BoundKind::Hard ? "hard" : "soft"},
                     {"trainable", r.trainable}});
  return json{{"propositions", props}, {"rules", rules}};
}

RuleBase rulebase_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("$", "expected an object");
  RuleBase rb;

  const json& props = field(doc, "propositions", "$");
  if (!props.is_array()) throw ParseError("$.propositions", "expected an array");
  std::set<std::string> prop_ids;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const std::string path = "$.propositions[" + std::to_string(i) + "]";
    const json& p = props[i];
    if (!p.is_object()) throw ParseError(path, "expected an object");
    Proposition prop;
    prop.id = string_at(field(p, "id", path), path + ".id");
    const std::string kind = string_at(field(p, "kind", path), path + ".kind");
    if (kind == "input") prop.kind = PropKind::Input;
    else if (kind == "derived") prop.kind = PropKind::Derived;
    else throw ParseError(path + ".kind", "expected \"input\" or \"derived\"");
    if (auto it = p.find("output_class"); it != p.end())
      prop.output_class = bool_at(*it, path + ".output_class");
    if (!prop_ids.insert(prop.id).second)
      throw ParseError(path + ".id", "duplicate proposition id '" + prop.id + "'");
    rb.propositions.push_back(std::move(prop));
  }

  const json& rules = field(doc, "rules", "$");
  if (!rules.is_array()) throw ParseError("$.rules", "expected an array");
  std::set<std::string> rule_ids;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string path = "$.rules[" + std::to_string(i) + "]";
    const json& r = rules[i];
    if (!r.is_object()) throw ParseError(path, "expected an object");
    Rule rule;
    rule.id = string_at(field(r, "id", path), path + ".id");
    if (!rule_ids.insert(rule.id).second)
      throw ParseError(path + ".id", "duplicate rule id '" + rule.id + "'");
    rule.antecedent = expr_from_json(field(r, "if", path), path + ".if");
    rule.consequent = string_at(field(r, "then", path), path + ".then");
    rule.weight = number_at(field(r, "weight", path), path + ".weight");
    if (auto it = r.find("bounds"); it != r.end()) {
      if (!it->is_array() || it->size() != 2) throw ParseError(path + ".bounds", "expected [lo, hi]");
      rule.bounds.lo = number_at((*it)[0], path + ".bounds[0]");
      rule.bounds.hi = number_at((*it)[1], path + ".bounds[1]");
    }
    if (auto it = r.find("bound_kind"); it != r.end()) {
      const std::string kind = string_at(*it, path + ".bound_kind");
      if (kind == "hard") rule.bound_kind = BoundKind::Hard;
      else if (kind == "soft") rule.bound_kind = BoundKind::Soft;
      else throw ParseError(path + ".bound_kind", "expected \"hard\" or \"soft\"");
    }
    if (auto it = r.find("trainable"); it != r.end()) rule.trainable = bool_at(*it, path + ".trainable");
    rb.rules.push_back(std::move(rule));
  }

  if (auto vs = validate(rb); !vs.empty()) throw ValidationError(std::move(vs));
  return rb;
}

std::string serialize(const RuleBase& rb) { return to_json(rb).dump(2) + "\n"; }

RuleBase parse_rulebase(std::string_view text) { return rulebase_from_json(parse_json(text, "")); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

RuleBase load_rulebase(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_rulebase(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + " " + e.where(), e.message());
  }
}

void save_rulebase(const std::filesystem::path& path, const RuleBase& rb) {
  write_file(path, serialize(rb));
}

std::vector<TrainingObject> parse_dataset(std::string_view text) {
  std::vector<TrainingObject> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    const std::string where = "line " + std::to_string(line_no);
    const json v = parse_json(line, where);
    if (!v.is_object()) throw ParseError(where, "expected an object");
    TrainingObject obj;
    obj.id = string_at(field(v, "id", where), where + " .id");
    obj.label = string_at(field(v, "label", where), where + " .label");
    const json& facts = field(v, "facts", where);
    if (!facts.is_object()) throw ParseError(where + " .facts", "expected an object");
    for (const auto& [key, value] : facts.items()) {
      const double cf = number_at(value, where + " .facts." + key);
      if (!(cf >= -1.0 && cf <= 1.0)) throw ParseError(where + " .facts." + key, "CF outside [-1, 1]");
      obj.facts.emplace(key, cf);
    }
    out.push_back(std::move(obj));
  }
  return out;
}

std::string serialize_dataset(std::span<const TrainingObject> objs) {
  std::string out;
  for (const TrainingObject& o : objs) {
    json facts = json::object();
    for (const auto& [k, v] : o.facts) facts[k] = v;
    out += json{{"id", o.id}, {"facts", facts}, {"label", o.label}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<TrainingObject> load_dataset(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_dataset(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + " " + e.where(), e.message());
  }
}

void save_dataset(const std::filesystem::path& path, std::span<const TrainingObject> objs) {
  write_file(path, serialize_dataset(objs));
}

// ---------------------------------------------------------------------------

json to_json(const OptimizerConfig& cfg) {
  json j{{"fd_eps", cfg.fd_eps},
         {"fd_scheme", to_string(cfg.fd_scheme)},
         {"step_init", cfg.step_init},
         {"armijo_c", cfg.armijo_c},
         {"shrink", cfg.shrink},
         {"max_backtracks", cfg.max_backtracks},
         {"max_iters", cfg.max_iters},
         {"tol_objective", cfg.tol_objective},
         {"tol_window", cfg.tol_window},
         {"tol_grad", cfg.tol_grad},
         {"use_tms", cfg.use_tms},
         {"seed", cfg.seed},
         {"multi_start", cfg.multi_start},
         {"holdout_fraction", cfg.holdout_fraction},
         {"firing_threshold", cfg.firing.threshold},
         {"penalty_mu", cfg.penalty.mu}};
  j["train_only"] = cfg.train_only ? json(*cfg.train_only) : json(nullptr);
  return j;
}

namespace {

OptimizerConfig config_from_json(const json& j) {
  OptimizerConfig cfg;
  const std::string p = "$.config";
  cfg.fd_eps = number_at(field(j, "fd_eps", p), p + ".fd_eps");
  cfg.fd_scheme = parse_fd_scheme(string_at(field(j, "fd_scheme", p), p + ".fd_scheme"));
  cfg.step_init = number_at(field(j, "step_init", p), p + ".step_init");
  cfg.armijo_c = number_at(field(j, "armijo_c", p), p + ".armijo_c");
  cfg.shrink = number_at(field(j, "shrink", p), p + ".shrink");
  cfg.max_backtracks = field(j, "max_backtracks", p).get<int>();
  cfg.max_iters = field(j, "max_iters", p).get<int>();
  cfg.tol_objective = number_at(field(j, "tol_objective", p), p + ".tol_objective");
  cfg.tol_window = field(j, "tol_window", p).get<int>();
  cfg.tol_grad = number_at(field(j, "tol_grad", p), p + ".tol_grad");
  cfg.use_tms = bool_at(field(j, "use_tms", p), p + ".use_tms");
  cfg.seed = field(j, "seed", p).get<std::uint64_t>();
  cfg.multi_start = field(j, "multi_start", p).get<int>();
  cfg.holdout_fraction = number_at(field(j, "holdout_fraction", p), p + ".holdout_fraction");
  cfg.firing.threshold = number_at(field(j, "firing_threshold", p), p + ".firing_threshold");
  cfg.penalty.mu = number_at(field(j, "penalty_mu", p), p + ".penalty_mu");
  if (const json& t = field(j, "train_only", p); !t.is_null())
    cfg.train_only = t.get<std::vector<std::string>>();
  return cfg;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_number_at(const json& v, const std::string& path) {
  if (v.is_null()) return std::nullopt;
  return number_at(v, path);
}

}  // namespace

json to_json(const TrainingTrace& t) {
  json iterations = json::array();
  for (const IterationRecord& r : t.iterations)
    iterations.push_back({{"iteration", r.iteration},
                          {"objective", r.objective},
                          {"metric", r.metric},
                          {"penalty", r.penalty},
                          {"step", r.step},
                          {"grad_norm", r.grad_norm},
                          {"projected_grad_norm", r.projected_grad_norm},
                          {"backtracks", r.backtracks},
                          {"holdout_objective", optional_number(r.holdout_objective)}});
  json starts = json::array();
  for (const StartSummary& s : t.starts)
    starts.push_back({{"start", s.start},
                      {"initial_objective", s.initial_objective},
                      {"final_objective", s.final_objective},
                      {"iterations", s.iterations},
                      {"stop_reason", to_string(s.stop_reason)}});
  json final_weights = json::object();
  json initial_weights = json::object();
  for (std::size_t r = 0; r < t.rule_ids.size(); ++r) {
    final_weights[t.rule_ids[r]] = t.final_weights[r];
    initial_weights[t.rule_ids[r]] = t.initial_weights[r];
  }
  const EvaluationBudget& b = t.budget;
  return json{{"config", to_json(t.config)},
              {"metric_name", t.metric_name},
              {"initial", {{"objective", t.initial_objective},
                           {"metric", t.initial_metric},
                           {"penalty", t.initial_penalty},
                           {"holdout_objective", optional_number(t.initial_holdout_objective)}}},
              {"iterations", iterations},
              {"rule_ids", t.rule_ids},
              {"trainable", t.trainable},
              {"initial_weights", initial_weights},
              {"final_weights", final_weights},
              {"budget", {{"G", b.gradients},
                          {"O", b.objects},
                          {"R", b.rules},
                          {"N", b.evaluations},
                          {"gradient_firings", b.gradient_firings},
                          {"line_search_evaluations", b.line_search_evaluations},
                          {"line_search_firings", b.line_search_firings}}},
              {"stop_reason", to_string(t.stop_reason)},
              {"boundary_stall", t.boundary_stall},
              {"starts", starts},
              {"best_start", t.best_start}};
}

TrainingTrace trace_from_json(const json& doc) {
  try {
    TrainingTrace t;
    t.config = config_from_json(field(doc, "config", "$"));
    t.metric_name = string_at(field(doc, "metric_name", "$"), "$.metric_name");
    const json& init = field(doc, "initial", "$");
    t.initial_objective = number_at(field(init, "objective", "$.initial"), "$.initial.objective");
    t.initial_metric = number_at(field(init, "metric", "$.initial"), "$.initial.metric");
    t.initial_penalty = number_at(field(init, "penalty", "$.initial"), "$.initial.penalty");
    t.initial_holdout_objective = optional_number_at(field(init, "holdout_objective", "$.initial"),
                                                     "$.initial.holdout_objective");
    const json& its = field(doc, "iterations", "$");
    for (std::size_t i = 0; i < its.size(); ++i) {
      const std::string p = "$.iterations[" + std::to_string(i) + "]";
      const json& r = its[i];
      IterationRecord rec;
      rec.iteration = field(r, "iteration", p).get<int>();
      rec.objective = number_at(field(r, "objective", p), p + ".objective");
      rec.metric = number_at(field(r, "metric", p), p + ".metric");
      rec.penalty = number_at(field(r, "penalty", p), p + ".penalty");
      rec.step = number_at(field(r, "step", p), p + ".step");
      rec.grad_norm = number_at(field(r, "grad_norm", p), p + ".grad_norm");
      rec.projected_grad_norm = number_at(field(r, "projected_grad_norm", p), p + ".projected_grad_norm");
      rec.backtracks = field(r, "backtracks", p).get<int>();
      rec.holdout_objective = optional_number_at(field(r, "holdout_objective", p), p + ".holdout_objective");
      t.iterations.push_back(rec);
    }
    t.rule_ids = field(doc, "rule_ids", "$").get<std::vector<std::string>>();
    t.trainable = field(doc, "trainable", "$").get<std::vector<std::string>>();
    const json& fw = field(doc, "final_weights", "$");
    const json& iw = field(doc, "initial_weights", "$");
    for (const std::string& id : t.rule_ids) {
      t.final_weights.push_back(number_at(field(fw, id.c_str(), "$.final_weights"), "$.final_weights." + id));
      t.initial_weights.push_back(number_at(field(iw, id.c_str(), "$.initial_weights"), "$.initial_weights." + id));
    }
    const json& b = field(doc, "budget", "$");
    t.budget.gradients = field(b, "G", "$.budget").get<std::uint64_t>();
    t.budget.objects = field(b, "O", "$.budget").get<std::uint64_t>();
    t.budget.rules = field(b, "R", "$.budget").get<std::uint64_t>();
    t.budget.evaluations = field(b, "N", "$.budget").get<std::uint64_t>();
    t.budget.gradient_firings = field(b, "gradient_firings", "$.budget").get<std::uint64_t>();
    t.budget.line_search_evaluations = field(b, "line_search_evaluations", "$.budget").get<std::uint64_t>();
    t.budget.line_search_firings = field(b, "line_search_firings", "$.budget").get<std::uint64_t>();
    t.stop_reason = parse_stop_reason(string_at(field(doc, "stop_reason", "$"), "$.stop_reason"));
    t.boundary_stall = bool_at(field(doc, "boundary_stall", "$"), "$.boundary_stall");
    const json& starts = field(doc, "starts", "$");
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const std::string p = "$.starts[" + std::to_string(i) + "]";
      const json& s = starts[i];
      StartSummary sum;
      sum.start = field(s, "start", p).get<int>();
      sum.initial_objective = number_at(field(s, "initial_objective", p), p + ".initial_objective");
      sum.final_objective = number_at(field(s, "final_objective", p), p + ".final_objective");
      sum.iterations = field(s, "iterations", p).get<int>();
      sum.stop_reason = parse_stop_reason(string_at(field(s, "stop_reason", p), p + ".stop_reason"));
      t.starts.push_back(sum);
    }
    t.best_start = field(doc, "best_start", "$").get<int>();
    return t;
  } catch (const json::exception& e) {
    throw ParseError("trace", e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError("trace", e.what());
  }
}

}  // namespace cfforge
