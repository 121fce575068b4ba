#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <json.hpp>

#include "vpbo/baselines.hpp"
#include "vpbo/benchmarks.hpp"
#include "vpbo/external_objective.hpp"
#include "vpbo/oracle.hpp"
#include "vpbo/output.hpp"
#include "vpbo/vpbo.hpp"

namespace vpbo {

/// One strategy entry of an experiment. `id` names the output files; `kind`
/// is one of vpbo, random, exp3, onehot.
struct StrategySpec {
  std::string id;
  std::string kind;
  EngineOptions options;
};

struct ExperimentConfig {
  ObjectiveSpec objective;
  std::vector<StrategySpec> strategies;
  int trials = 20;
  int iterations = 200;
  int init_budget = 24;
  std::uint64_t seed = 0;
  fs::path out_dir = "vpbo_out";
  int workers = 1;
  bool oracle = false;
  OracleOptions oracle_options;
  std::size_t combo_cap = kDefaultComboCap;
  int top_n = 5;
  double good_threshold = 0.95;
  /// Points per side of the reference-optimum grid; 0 disables the table.
  int reference_grid = 1000;

  void validate() const {
    objective.validate();
    if (strategies.empty()) throw ConfigError("no strategies configured");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (init_budget < 1) throw ConfigError("init_budget must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (top_n < 1) throw ConfigError("top_n must be >= 1");
    if (!(good_threshold > 0.0 && good_threshold <= 1.0)) throw ConfigError("good_threshold must be in (0, 1]");
    if (reference_grid < 0) throw ConfigError("reference_grid must be >= 0");
    std::set<std::string> ids;
    for (const auto& s : strategies) {
      if (s.id.empty() || s.id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-") !=
                              std::string::npos)
        throw ConfigError("strategy id '" + s.id + "' must be non-empty and use only letters, digits and '-'");
      if (s.id == "oracle") throw ConfigError("strategy id 'oracle' is reserved");
      if (!ids.insert(s.id).second) throw ConfigError("duplicate strategy id '" + s.id + "'");
      if (s.kind != "vpbo" && s.kind != "random" && s.kind != "exp3" && s.kind != "onehot")
        throw ConfigError("unknown strategy kind '" + s.kind + "' (expected vpbo, random, exp3 or onehot)");
      if (s.options.inner_samples < 1) throw ConfigError(s.id + ": inner_samples must be >= 1");
      if (s.options.init == InitMode::Search && init_budget % 2 != 0)
        throw ConfigError(s.id + ": search initialisation needs an even init_budget, got " + std::to_string(init_budget));
      if (!s.options.lambda.learned && !(s.options.lambda.fixed >= 0.0 && s.options.lambda.fixed <= 1.0))
        throw ConfigError(s.id + ": fixed lambda must lie in [0, 1]");
    }
  }
};

/// Strategy by name: vpbo, vpbo-s (search init), random, exp3, onehot.
inline StrategySpec named_strategy(const std::string& name) {
  StrategySpec s;
  s.id = name;
  if (name == "vpbo-s") {
    s.kind = "vpbo";
    s.options.init = InitMode::Search;
  } else {
    s.kind = name;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Configuration parsing

inline LambdaMode parse_lambda(const std::string& text) {
  if (text == "auto") return LambdaMode{true, 0.5};
  if (text.rfind("fixed:", 0) == 0) {
    const std::string v = text.substr(6);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !(x >= 0.0 && x <= 1.0))
      throw ConfigError("lambda value must be a number in [0, 1], got '" + v + "'");
    return LambdaMode{false, x};
  }
  throw ConfigError("lambda must be 'auto' or 'fixed:<v>', got '" + text + "'");
}

inline InitMode parse_init(const std::string& text) {
  if (text == "random") return InitMode::Random;
  if (text == "search") return InitMode::Search;
  throw ConfigError("init must be 'random' or 'search', got '" + text + "'");
}

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + k + "'");
  }
}

inline ObjectiveSpec objective_from_json(const nlohmann::json& j) {
  if (j.is_string()) return ObjectiveSpec::builtin(j.get<std::string>());
  check_keys(j, {"name", "command", "categories", "cont_dim", "timeout_s", "noise_std"}, "objective");
  const double noise = j.contains("noise_std") ? json_get<double>(j, "noise_std", "objective") : 0.0;
  if (j.contains("command")) {
    ObjectiveSpec s;
    s.kind = ObjectiveSpec::Kind::External;
    s.name = j.contains("name") ? json_get<std::string>(j, "name", "objective") : "external";
    s.command = json_get<std::vector<std::string>>(j, "command", "objective");
    if (!j.contains("categories") || !j.contains("cont_dim"))
      throw ConfigError("external objective needs 'categories' and 'cont_dim'");
    try {
      s.space = CategorySpace(json_get<std::vector<int>>(j, "categories", "objective"),
                              json_get<int>(j, "cont_dim", "objective"));
    } catch (const DimensionError& e) {
      throw ConfigError(std::string("objective space: ") + e.what());
    }
    if (j.contains("timeout_s")) s.timeout_s = json_get<double>(j, "timeout_s", "objective");
    if (!(s.timeout_s > 0.0)) throw ConfigError("objective timeout_s must be > 0");
    s.noise_std = noise;
    return s;
  }
  if (!j.contains("name")) throw ConfigError("objective needs a 'name' or a 'command'");
  return ObjectiveSpec::builtin(json_get<std::string>(j, "name", "objective"), noise);
}

inline StrategySpec strategy_from_json(const nlohmann::json& j) {
  if (j.is_string()) return named_strategy(j.get<std::string>());
  check_keys(j, {"id", "kind", "init", "lambda", "inner_samples", "hyper_period", "restarts", "share_candidates",
                 "local_refine", "ucb_k"},
             "strategy");
  const std::string id = j.contains("id") ? json_get<std::string>(j, "id", "strategy") : "";
  StrategySpec s;
  if (j.contains("kind")) {
    s.kind = json_get<std::string>(j, "kind", "strategy");
    s.id = id.empty() ? s.kind : id;
  } else {
    if (id.empty()) throw ConfigError("strategy needs an 'id' or a 'kind'");
    s = named_strategy(id);
  }
  const std::string where = "strategy " + s.id;
  if (j.contains("init")) s.options.init = parse_init(json_get<std::string>(j, "init", where));
  if (j.contains("lambda")) s.options.lambda = parse_lambda(json_get<std::string>(j, "lambda", where));
  if (j.contains("inner_samples")) s.options.inner_samples = json_get<int>(j, "inner_samples", where);
  if (j.contains("hyper_period")) s.options.hyper_period = json_get<int>(j, "hyper_period", where);
  if (j.contains("restarts")) s.options.hyperopt.restarts = json_get<int>(j, "restarts", where);
  if (j.contains("share_candidates")) s.options.share_candidates = json_get<bool>(j, "share_candidates", where);
  if (j.contains("local_refine")) s.options.local_refine = json_get<bool>(j, "local_refine", where);
  if (j.contains("ucb_k")) s.options.ucb_k = json_get<double>(j, "ucb_k", where);
  if (s.options.hyper_period < 0) throw ConfigError(where + ": hyper_period must be >= 0");
  if (s.options.hyperopt.restarts < 1) throw ConfigError(where + ": restarts must be >= 1");
  return s;
}

} // namespace detail

/// Parses an experiment description. Unknown fields are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"objective", "strategies", "trials", "iterations", "init_budget", "seed", "out", "workers",
                      "oracle", "oracle_restarts", "combo_cap", "top_n", "good_threshold", "reference_grid"},
                     "config");
  ExperimentConfig c;
  if (j.contains("objective")) c.objective = detail::objective_from_json(j.at("objective"));
  if (j.contains("strategies")) {
    if (!j.at("strategies").is_array()) throw ConfigError("'strategies' must be an array");
    for (const auto& s : j.at("strategies")) c.strategies.push_back(detail::strategy_from_json(s));
  }
  const std::string w = "config";
  if (j.contains("trials")) c.trials = detail::json_get<int>(j, "trials", w);
  if (j.contains("iterations")) c.iterations = detail::json_get<int>(j, "iterations", w);
  if (j.contains("init_budget")) c.init_budget = detail::json_get<int>(j, "init_budget", w);
  if (j.contains("seed")) c.seed = detail::json_get<std::uint64_t>(j, "seed", w);
  if (j.contains("out")) c.out_dir = detail::json_get<std::string>(j, "out", w);
  if (j.contains("workers")) c.workers = detail::json_get<int>(j, "workers", w);
  if (j.contains("oracle")) c.oracle = detail::json_get<bool>(j, "oracle", w);
  if (j.contains("oracle_restarts")) c.oracle_options.restarts = detail::json_get<int>(j, "oracle_restarts", w);
  if (j.contains("combo_cap")) c.combo_cap = detail::json_get<std::size_t>(j, "combo_cap", w);
  if (j.contains("top_n")) c.top_n = detail::json_get<int>(j, "top_n", w);
  if (j.contains("good_threshold")) c.good_threshold = detail::json_get<double>(j, "good_threshold", w);
  if (j.contains("reference_grid")) c.reference_grid = detail::json_get<int>(j, "reference_grid", w);
  if (c.oracle_options.restarts < 1) throw ConfigError("oracle_restarts must be >= 1");
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

/// Command-line values that replace configuration fields when set.
struct ConfigOverrides {
  std::optional<std::string> objective;
  std::vector<std::string> strategies;
  std::optional<int> trials;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> init;
  std::optional<std::string> lambda;
  std::optional<int> inner_samples;
  bool oracle = false;
  std::optional<std::size_t> combo_cap;
  std::optional<int> workers;
};

/// Applies overrides; --init, --lambda and --inner-samples act on every
/// strategy. The output directory falls back to $VPBO_OUT when neither the
/// file nor the command line sets it.
inline void apply_overrides(ExperimentConfig& c, const ConfigOverrides& o, bool out_from_file) {
  if (o.objective) c.objective = ObjectiveSpec::builtin(*o.objective, c.objective.noise_std);
  if (!o.strategies.empty()) {
    c.strategies.clear();
    for (const auto& s : o.strategies) c.strategies.push_back(named_strategy(s));
  }
  if (c.strategies.empty()) c.strategies.push_back(named_strategy("vpbo"));
  if (o.trials) c.trials = *o.trials;
  if (o.iterations) c.iterations = *o.iterations;
  if (o.seed) c.seed = *o.seed;
  if (o.out) {
    c.out_dir = *o.out;
  } else if (!out_from_file) {
    if (const char* env = std::getenv("VPBO_OUT"); env && *env) c.out_dir = env;
  }
  for (auto& s : c.strategies) {
    if (o.init) s.options.init = parse_init(*o.init);
    if (o.lambda) s.options.lambda = parse_lambda(*o.lambda);
    if (o.inner_samples) s.options.inner_samples = *o.inner_samples;
  }
  if (o.oracle) c.oracle = true;
  if (o.combo_cap) c.combo_cap = *o.combo_cap;
  if (o.workers) c.workers = *o.workers;
}

// ---------------------------------------------------------------------------
// Running

inline std::unique_ptr<StrategyBase> make_strategy(const StrategySpec& s, const ExperimentConfig& c) {
  EngineOptions opt = s.options;
  opt.init_budget = c.init_budget;
  opt.horizon = c.iterations;
  opt.combo_cap = c.combo_cap;
  if (s.kind == "vpbo") return std::make_unique<VpboStrategy>(opt, s.id);
  if (s.kind == "random") return std::make_unique<RandomBanditStrategy>(opt, s.id);
  if (s.kind == "exp3") return std::make_unique<Exp3BanditStrategy>(opt, s.id);
  if (s.kind == "onehot") return std::make_unique<OneHotStrategy>(opt, s.id);
  throw ConfigError("unknown strategy kind '" + s.kind + "'");
}

/// Master seed of trial j; every strategy of trial j shares it, which pairs
/// the trials across strategies.
inline std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return derive_seed(master, "trial", {static_cast<std::uint64_t>(trial)});
}

/// Objective for one trial: builtin functions are shared, external commands get
/// their own process. Observation noise comes from a stream owned by the trial.
inline ObjectiveFn trial_objective(const ObjectiveSpec& spec, std::uint64_t seed, std::string_view label) {
  ObjectiveFn f;
  if (spec.kind == ObjectiveSpec::Kind::External) {
    auto proc = std::make_shared<ExternalObjective>(spec.command, spec.timeout_s);
    f = [proc](const MixedPoint& z) { return proc->evaluate(z); };
  } else {
    f = builtin_objective(spec);
  }
  if (spec.noise_std > 0.0) {
    auto noise = std::make_shared<Stream>(Stream(seed).child("noise").child(label));
    f = [f, noise, sd = spec.noise_std](const MixedPoint& z) { return f(z) + sd * noise->normal(); };
  }
  return f;
}

struct TrialFailure {
  std::string strategy;
  int trial = 0;
  std::string message;
};

struct ExperimentResult {
  std::map<std::string, std::vector<Trace>> traces; // successful trials in trial order
  std::vector<OracleResult> oracle;
  std::vector<TrialFailure> failures;
  std::optional<std::vector<double>> reference_optima;
  ExperimentOutputs outputs;

  int exit_code() const { return failures.empty() ? 0 : 1; }
};

namespace detail {

inline std::string oracle_csv(const OracleResult& r) {
  std::string s = "t,best\n0," + format_double(r.initial_best) + "\n";
  for (std::size_t t = 0; t < r.trace.size(); ++t) s += std::to_string(t + 1) + "," + format_double(r.trace[t]) + "\n";
  return s;
}

inline std::string oracle_arms_csv(const OracleResult& r) {
  std::string s = "combo,best\n";
  for (std::size_t c = 0; c < r.arm_final.size(); ++c) s += std::to_string(c) + "," + format_double(r.arm_final[c]) + "\n";
  return s;
}

inline OracleResult read_oracle(const fs::path& path, const fs::path& arms_path, std::uint64_t seed) {
  OracleResult r;
  r.seed = seed;
  const CsvTable t = parse_csv(read_file(path), path.string());
  for (const auto& row : t.rows) {
    const double v = parse_double(row.at(1), path.string());
    if (parse_int(row.at(0), path.string()) == 0) r.initial_best = v;
    else r.trace.push_back(v);
  }
  const CsvTable a = parse_csv(read_file(arms_path), arms_path.string());
  for (const auto& row : a.rows) r.arm_final.push_back(parse_double(row.at(1), arms_path.string()));
  return r;
}

/// Runs tasks on `workers` threads; tasks handle their own errors.
inline void run_pool(std::vector<std::function<void()>>& tasks, int workers) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) tasks[i]();
  };
  const int n = std::min<int>(workers, static_cast<int>(tasks.size()));
  if (n <= 1) return work();
  std::vector<std::thread> pool;
  for (int k = 0; k < n; ++k) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

} // namespace detail

/// Runs every strategy x trial (and the oracle, when configured), then
/// computes metrics and writes them into the output directory. A trial whose
/// trace file already exists is read back instead of rerun. Failing trials are
/// reported in the result and the remaining trials still run.
inline ExperimentResult run_experiment(const ExperimentConfig& c, std::ostream* log = &std::cerr) {
  c.validate();
  const CategorySpace& space = c.objective.space;
  enumerate_combinations(space, c.combo_cap); // fail early on an oversized space
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + c.out_dir.string() + ": " + ec.message());

  std::mutex mu;
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(mu);
    *log << msg << "\n";
  };

  const std::size_t ns = c.strategies.size();
  std::vector<std::vector<std::optional<Trace>>> slots(ns, std::vector<std::optional<Trace>>(c.trials));
  std::vector<std::optional<OracleResult>> oracle_slots(c.oracle ? c.trials : 0);
  ExperimentResult res;

  std::vector<std::function<void()>> tasks;
  for (int j = 0; j < c.trials; ++j) {
    for (std::size_t s = 0; s < ns; ++s) {
      tasks.emplace_back([&, s, j] {
        const StrategySpec& spec = c.strategies[s];
        const std::uint64_t seed = trial_seed(c.seed, j);
        const TracePaths paths = trace_paths(c.out_dir, spec.id, j);
        const std::string tp = paths.trace.string();
        try {
          if (paths.complete()) {
            Trace tr = read_trace(paths, space, spec.id, seed);
            if (static_cast<int>(tr.records.size()) == c.iterations) {
              slots[s][j] = std::move(tr);
              note("resume: " + tp);
              return;
            }
            note("rerun: " + tp + " has the wrong length");
          }
          auto strategy = make_strategy(spec, c);
          const ObjectiveFn f = trial_objective(c.objective, seed, spec.id);
          strategy->initialise(f, space, seed);
          for (int t = 0; t < c.iterations; ++t) strategy->step(f);
          write_trace(paths, strategy->trace(), space);
          slots[s][j] = strategy->trace();
          note("done: " + spec.id + " trial " + std::to_string(j) + " best " + format_double(strategy->trace().final_best()));
        } catch (const std::exception& e) {
          std::lock_guard lock(mu);
          res.failures.push_back({spec.id, j, e.what()});
          if (log) *log << "FAILED: " << spec.id << " trial " << j << ": " << e.what() << "\n";
        }
      });
    }
    if (c.oracle) {
      tasks.emplace_back([&, j] {
        const std::uint64_t seed = trial_seed(c.seed, j);
        const fs::path op = c.out_dir / ("oracle_" + std::to_string(j) + ".csv");
        const fs::path ap = c.out_dir / ("oracle_arms_" + std::to_string(j) + ".csv");
        try {
          if (fs::exists(op) && fs::exists(ap)) {
            auto r = detail::read_oracle(op, ap, seed);
            if (static_cast<int>(r.trace.size()) == c.iterations) {
              oracle_slots[j] = std::move(r);
              note("resume: " + op.string());
              return;
            }
          }
          const ObjectiveFn f = trial_objective(c.objective, seed, "oracle");
          OracleResult r = oracle_run(f, space, c.iterations, c.init_budget, seed, c.oracle_options, c.combo_cap);
          write_file_atomic(ap, detail::oracle_arms_csv(r));
          write_file_atomic(op, detail::oracle_csv(r));
          note("done: oracle trial " + std::to_string(j) + " best " + format_double(r.trace.back()));
          oracle_slots[j] = std::move(r);
        } catch (const std::exception& e) {
          std::lock_guard lock(mu);
          res.failures.push_back({"oracle", j, e.what()});
          if (log) *log << "FAILED: oracle trial " << j << ": " << e.what() << "\n";
        }
      });
    }
  }
  detail::run_pool(tasks, c.workers);

  std::sort(res.failures.begin(), res.failures.end(),
            [](const TrialFailure& a, const TrialFailure& b) { return std::tie(a.strategy, a.trial) < std::tie(b.strategy, b.trial); });
  for (std::size_t s = 0; s < ns; ++s) {
    auto& v = res.traces[c.strategies[s].id];
    for (auto& t : slots[s])
      if (t) v.push_back(std::move(*t));
  }
  for (auto& o : oracle_slots)
    if (o) res.oracle.push_back(std::move(*o));

  // Metrics.
  ExperimentOutputs& out = res.outputs;
  out.space = &c.objective.space;
  out.top_n = c.top_n;
  for (const auto& [id, trs] : res.traces) {
    if (trs.empty()) {
      note("warning: no successful trials for " + id + "; summary skipped");
      continue;
    }
    out.summaries[id] = aggregate_traces(trs);
    out.wallclock[id] = wallclock_report(trs);
  }
  if (!res.oracle.empty()) {
    std::vector<std::vector<double>> curves;
    for (const auto& r : res.oracle) {
      std::vector<double> cv{r.initial_best};
      cv.insert(cv.end(), r.trace.begin(), r.trace.end());
      curves.push_back(std::move(cv));
    }
    out.summaries["oracle"] = aggregate_curves(curves);
    const auto ranking = oracle_ranking(res.oracle);
    for (const auto& [id, trs] : res.traces)
      if (!trs.empty()) out.arm_frequency[id] = arm_pull_frequency(trs, ranking, c.top_n);
  } else {
    note("warning: no oracle ranking; arm pull frequency skipped");
  }
  if (c.objective.kind == ObjectiveSpec::Kind::Builtin && c.reference_grid > 0 && space.cont_dim() == 2) {
    const auto optima = bench::reference_optima(space, builtin_objective(c.objective), c.reference_grid);
    std::vector<double> values;
    for (const auto& a : optima) values.push_back(a.value);
    res.reference_optima = values;
    for (const auto& [id, trs] : res.traces)
      if (!trs.empty()) out.good_choice[id] = good_choice_frequency(trs, values, c.good_threshold);
  } else {
    note("warning: no reference optimum table; good-choice frequency skipped");
  }
  out.traces = res.traces;
  emit_outputs(out, c.out_dir);
  return res;
}

} // namespace vpbo
