#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cfforge/engine.hpp"
#include "cfforge/io.hpp"
#include "cfforge/metric.hpp"
#include "cfforge/optimizer.hpp"
#include "cfforge/synth.hpp"

namespace cfforge::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Input problems that should map to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("CF_FORGE_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("CF_FORGE_SEED is not an unsigned integer: ") + env);
  }
}

std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Scores {
  double metric = 0.0;
  double penalty = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_object;
  double objective() const { return metric + penalty; }
};

Scores score(const RuleBase& rb, std::span<const TrainingObject> data, FiringPolicy firing,
             PenaltyConfig pen, bool per_object = false) {
  const RuleGraph graph(rb);
  const Engine engine(graph, firing);
  const std::vector<double> w = rb.weights();
  std::vector<ObjectEvaluation> evals;
  std::vector<std::size_t> labels;
  for (const TrainingObject& o : data) {
    const EncodedObject enc = encode(graph, o);
    evals.push_back(engine.evaluate_full(enc, w));
    labels.push_back(enc.label);
  }
  Scores s;
  MetricValue m = class_margin(evals, labels, graph.output_classes(), per_object);
  s.metric = m.value;
  s.per_object = std::move(m.per_object);
  s.penalty = penalty(rb, pen);
  s.accuracy = accuracy(engine, evals, labels);
  return s;
}

json scores_json(const Scores& s) {
  return json{{"metric", s.metric},
              {"penalty", s.penalty},
              {"objective", s.objective()},
              {"accuracy", s.accuracy}};
}

// ---------------------------------------------------------------------------

struct GenOptions {
  int features = 10;
  int classes = 5;
  int objects = 100;
  int irrelevant = 3;
  double noise = 0.0;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string shape = "flat";
  int rules = 0;
  int holdout_objects = 0;
};

int cmd_gen(const GenOptions& o, std::ostream& out) {
  const std::uint64_t seed = o.seed ? *o.seed : default_seed();
  const fs::path dir(o.out);
  const Shape shape = parse_shape(o.shape);

  if (shape != Shape::Flat) {
    if (o.rules <= 0) throw SpecInvalid("--rules is required for chain and tree shapes");
    const ShapedResult gen = generate_shaped(o.rules, shape, seed);
    save_rulebase(dir / "rules.json", gen.rules);
    save_dataset(dir / "train.jsonl", gen.data);
    out << json{{"rules", gen.rules.rules.size()}, {"objects", gen.data.size()},
                {"shape", to_string(shape)}}.dump()
        << "\n";
    return kOk;
  }

  SynthSpec spec;
  spec.features = o.features;
  spec.classes = o.classes;
  spec.objects = o.objects + o.holdout_objects;
  spec.irrelevant_features = o.irrelevant;
  spec.noise = o.noise;
  spec.seed = seed;
  if (o.holdout_objects < 0) throw SpecInvalid("--holdout-objects must be non-negative");
  const SynthResult gen = generate(spec);

  save_rulebase(dir / "rules.json", gen.zero);
  save_rulebase(dir / "expert.json", gen.expert);
  save_rulebase(dir / "refined.json", gen.refined);
  const std::span<const TrainingObject> all(gen.data);
  save_dataset(dir / "train.jsonl", all.first(static_cast<std::size_t>(o.objects)));
  if (o.holdout_objects > 0) save_dataset(dir / "holdout.jsonl", all.subspan(static_cast<std::size_t>(o.objects)));
  write_file(dir / "truth.json",
             json{{"class_features", gen.class_features}, {"irrelevant", gen.irrelevant}}.dump(2) + "\n");

  out << json{{"rules", gen.zero.rules.size()},
              {"objects", o.objects},
              {"holdout_objects", o.holdout_objects},
              {"irrelevant", gen.irrelevant}}
             .dump()
      << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string rules;
  std::string data;
  std::string out = "trained.json";
  std::string trace;
  std::string report;
  std::optional<std::uint64_t> seed;
  bool no_tms = false;
  std::string fd = "forward";
  std::string train_only;
  double holdout = 0.0;
  int multi_start = 1;
  int max_iters = 200;
  double step = 0.5;
  double eps = 1e-4;
  double mu = 10.0;
  double threshold = 0.0;
  unsigned threads = 1;
  bool timing = false;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const RuleBase rb = load_rulebase(o.rules);
  const std::vector<TrainingObject> data = load_dataset(o.data);

  OptimizerConfig cfg;
  cfg.seed = o.seed ? *o.seed : default_seed();
  cfg.use_tms = !o.no_tms;
  cfg.fd_scheme = parse_fd_scheme(o.fd);
  if (!o.train_only.empty()) cfg.train_only = split_ids(o.train_only);
  cfg.holdout_fraction = o.holdout;
  cfg.multi_start = o.multi_start;
  cfg.max_iters = o.max_iters;
  cfg.step_init = o.step;
  cfg.fd_eps = o.eps;
  cfg.penalty.mu = o.mu;
  cfg.firing.threshold = o.threshold;
  cfg.threads = o.threads;
  try {
    cfg.check();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  const ClassMarginMetric metric;
  MultiStartResult result = train_multi(rb, data, metric, cfg);
  const TrainResult& best = result.best;
  const TrainingTrace& trace = best.trace;

  const fs::path out_path(o.out);
  const fs::path dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  const fs::path trace_path = o.trace.empty() ? dir / "trace.json" : fs::path(o.trace);
  const fs::path report_path = o.report.empty() ? dir / "report.json" : fs::path(o.report);

  save_rulebase(out_path, best.rules);
  write_file(trace_path, to_json(trace).dump(2) + "\n");

  RuleBase initial = rb;
  if (trace.best_start > 0) {
    for (std::size_t r = 0; r < trace.rule_ids.size(); ++r) initial.rules[r].weight = trace.initial_weights[r];
  }
  const Scores before = score(initial, data, cfg.firing, cfg.penalty);
  const Scores after = score(best.rules, data, cfg.firing, cfg.penalty);

  json holdout_curve = json::array();
  if (trace.initial_holdout_objective) holdout_curve.push_back(*trace.initial_holdout_objective);
  for (const IterationRecord& r : trace.iterations)
    if (r.holdout_objective) holdout_curve.push_back(*r.holdout_objective);

  const json full = to_json(trace);
  json report{{"config", full["config"]},
              {"metric_name", trace.metric_name},
              {"initial", scores_json(before)},
              {"final", scores_json(after)},
              {"training_objective", {{"initial", trace.initial_objective}, {"final", trace.final_objective()}}},
              {"iterations", trace.iterations.size()},
              {"stop_reason", to_string(trace.stop_reason)},
              {"boundary_stall", trace.boundary_stall},
              {"holdout_curve", holdout_curve},
              {"budget", full["budget"]},
              {"starts", full["starts"]},
              {"best_start", trace.best_start}};
  if (o.timing)
    report["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file(report_path, report.dump(2) + "\n");
  out << report.dump() << "\n";

  return trace.stop_reason == StopReason::LineSearchFailure ? kOptimizationFailure : kOk;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string rules;
  std::string data;
  double mu = 10.0;
  double threshold = 0.0;
  bool per_object = false;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const RuleBase rb = load_rulebase(o.rules);
  const std::vector<TrainingObject> data = load_dataset(o.data);
  FiringPolicy firing{o.threshold};
  try {
    firing.check();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const Scores s = score(rb, data, firing, PenaltyConfig{o.mu}, o.per_object);
  json report = scores_json(s);
  if (o.per_object) {
    json rows = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) rows.push_back({{"id", data[i].id}, {"term", s.per_object[i]}});
    report["per_object"] = rows;
  }
  out << report.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_audit(const std::string& trace_path, std::ostream& out) {
  const TrainingTrace trace = trace_from_json(json::parse(read_file(trace_path)));
  const AuditStatus status = audit_budget(trace);
  const EvaluationBudget& b = trace.budget;
  out << json{{"status", to_string(status)},
              {"G", b.gradients},
              {"O", b.objects},
              {"R", b.rules},
              {"N", b.evaluations},
              {"G*O*R", b.gradients * b.objects * b.rules}}
             .dump()
      << "\n";
  return status == AuditStatus::Fail ? kAuditFailed : kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

json bench(Shape shape, int start, int sizes, std::uint64_t seed, unsigned threads) {
  if (sizes < 1) throw SpecInvalid("need at least one ladder size");
  const ClassMarginMetric metric;
  json ladder = json::array();
  int R = start;
  for (int k = 0; k < sizes; ++k) {
    const ShapedResult gen = generate_shaped(R, shape, seed);
    const RuleGraph graph(gen.rules);
    std::vector<std::size_t> trainable(graph.num_rules());
    std::uint64_t closure_sum = 0;
    for (std::size_t r = 0; r < trainable.size(); ++r) {
      trainable[r] = r;
      closure_sum += graph.downstream_closure(r).size();
    }
    const TrainingProblem problem(graph, encode(graph, gen.data), metric, {}, {});
    const std::vector<double> w = gen.rules.weights();

    json row{{"R", R}, {"O", gen.data.size()}, {"closure_sum", closure_sum}};
    for (bool tms : {true, false}) {
      OptimizerConfig cfg;
      cfg.use_tms = tms;
      cfg.threads = threads;
      std::vector<ObjectEvaluation> states;
      problem.evaluate_all(w, states);
      const double f0 = problem.objective(w, states);
      EvaluationBudget budget;
      gradient(problem, w, states, f0, trainable, cfg, budget);
      row[tms ? "tms_firings" : "naive_firings"] = budget.gradient_firings;
    }
    ladder.push_back(row);
    R = shape == Shape::Tree ? 2 * R + 1 : 2 * R;
  }

  json ratios = json::array();
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    const json& a = ladder[k - 1];
    const json& b = ladder[k];
    const double r0 = a["R"].get<double>();
    const double r1 = b["R"].get<double>();
    ratios.push_back(
        {{"from", a["R"]},
         {"to", b["R"]},
         {"tms", b["tms_firings"].get<double>() / a["tms_firings"].get<double>()},
         {"naive", b["naive_firings"].get<double>() / a["naive_firings"].get<double>()},
         {"closure_sum", b["closure_sum"].get<double>() / a["closure_sum"].get<double>()},
         {"linear", r1 / r0},
         {"quadratic", (r1 / r0) * (r1 / r0)},
         {"r_log_r", (r1 * std::log2(r1 + 1.0)) / (r0 * std::log2(r0 + 1.0))}});
  }
  return json{{"shape", to_string(shape)}, {"seed", seed}, {"ladder", ladder}, {"ratios", ratios}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train certainty-factor rule bases by steepest descent", "cfforge"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic rule base and dataset");
  gen_cmd->add_option("--features", gen.features, "Number of features")->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--objects", gen.objects, "Training objects")->capture_default_str();
  gen_cmd->add_option("--irrelevant", gen.irrelevant, "Features with no class signal")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Probability of perturbing an object")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed (default: $CF_FORGE_SEED or 0)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--shape", gen.shape, "flat | chain | tree")->capture_default_str();
  gen_cmd->add_option("--rules", gen.rules, "Rule count for chain/tree shapes");
  gen_cmd->add_option("--holdout-objects", gen.holdout_objects, "Extra objects written to holdout.jsonl");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Fit rule weights to a dataset");
  train_cmd->add_option("--rules", tr.rules, "Rule-base file")->required();
  train_cmd->add_option("--data", tr.data, "Dataset (JSON Lines)")->required();
  train_cmd->add_option("--out", tr.out, "Trained rule-base file")->capture_default_str();
  train_cmd->add_option("--trace", tr.trace, "Trace file (default: next to --out)");
  train_cmd->add_option("--report", tr.report, "Report file (default: next to --out)");
  train_cmd->add_option("--seed", tr.seed, "RNG seed (default: $CF_FORGE_SEED or 0)");
  train_cmd->add_flag("--no-tms", tr.no_tms, "Re-evaluate every object for every gradient probe");
  train_cmd->add_option("--fd", tr.fd, "forward | central")->capture_default_str();
  train_cmd->add_option("--train-only", tr.train_only, "Comma-separated rule ids to optimize");
  train_cmd->add_option("--holdout", tr.holdout, "Fraction of objects held out")->capture_default_str();
  train_cmd->add_option("--multi-start", tr.multi_start, "Number of starting points")->capture_default_str();
  train_cmd->add_option("--max-iters", tr.max_iters, "Iteration cap")->capture_default_str();
  train_cmd->add_option("--step", tr.step, "Initial line-search step")->capture_default_str();
  train_cmd->add_option("--eps", tr.eps, "Finite-difference step")->capture_default_str();
  train_cmd->add_option("--mu", tr.mu, "Soft-bound penalty coefficient")->capture_default_str();
  train_cmd->add_option("--threshold", tr.threshold, "Firing threshold")->capture_default_str();
  train_cmd->add_option("--threads", tr.threads, "Worker threads")->capture_default_str();
  train_cmd->add_flag("--timing", tr.timing, "Add wall time to the report");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a rule base against a dataset");
  eval_cmd->add_option("--rules", ev.rules, "Rule-base file")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset (JSON Lines)")->required();
  eval_cmd->add_option("--mu", ev.mu, "Soft-bound penalty coefficient")->capture_default_str();
  eval_cmd->add_option("--threshold", ev.threshold, "Firing threshold")->capture_default_str();
  eval_cmd->add_flag("--per-object", ev.per_object, "Include per-object metric terms");

  std::string trace_path;
  auto* audit_cmd = app.add_subcommand("audit", "Check N = G * O * R on a trace");
  audit_cmd->add_option("--trace", trace_path, "Trace file")->required();

  std::string bench_shape = "flat";
  int bench_start = 0;
  int bench_sizes = 2;
  std::optional<std::uint64_t> bench_seed;
  unsigned bench_threads = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Count rule firings per gradient over a size ladder");
  bench_cmd->add_option("--shape", bench_shape, "flat | chain | tree")->capture_default_str();
  bench_cmd->add_option("--start", bench_start, "Smallest rule count (default 64, tree 63)");
  bench_cmd->add_option("--sizes", bench_sizes, "Ladder length")->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed, "RNG seed (default: $CF_FORGE_SEED or 0)");
  bench_cmd->add_option("--threads", bench_threads, "Worker threads")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*train_cmd) return cmd_train(tr, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*audit_cmd) return cmd_audit(trace_path, out);
    if (*bench_cmd) {
      const Shape shape = parse_shape(bench_shape);
      const int start = bench_start > 0 ? bench_start : (shape == Shape::Tree ? 63 : 64);
      const std::uint64_t seed = bench_seed ? *bench_seed : default_seed();
      out << bench(shape, start, bench_sizes, seed, bench_threads).dump(2) << "\n";
      return kOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const SpecInvalid& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace cfforge::cli
