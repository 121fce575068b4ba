// vpbo: run a multi-trial, multi-strategy experiment and write traces,
// summaries, metric tables and plots.
//
//   vpbo --objective func2c --strategy vpbo --strategy random --trials 10 --iters 100 --oracle --out runs/fig1
//   vpbo --config ablation.json --seed 7
//
// Exit status: 0 on success, 1 if any trial failed, 2 on a configuration error.

#include <CLI11.hpp>

#include <iostream>

#include "vpbo/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Value-proposal Bayesian optimisation experiments"};
  std::string config_path;
  vpbo::ConfigOverrides o;
  std::string objective, out, init, lambda;
  int trials = 0, iters = 0, inner = 0, workers = 0;
  std::uint64_t seed = 0;
  std::size_t cap = 0;
  bool quiet = false;

  app.add_option("config,--config", config_path, "JSON experiment file")->check(CLI::ExistingFile);
  auto* o_obj = app.add_option("--objective", objective, "builtin objective (func2c, func3c)");
  app.add_option("--strategy", o.strategies, "strategy to run; repeatable (vpbo, vpbo-s, random, exp3, onehot)")
      ->delimiter(',');
  auto* o_trials = app.add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
  auto* o_iters = app.add_option("--iters", iters, "iterations per trial")->check(CLI::PositiveNumber);
  auto* o_seed = app.add_option("--seed", seed, "master seed");
  auto* o_out = app.add_option("--out", out, "output directory (default $VPBO_OUT)");
  auto* o_init = app.add_option("--init", init, "initial design for every strategy")->check(CLI::IsMember({"random", "search"}));
  auto* o_lambda = app.add_option("--lambda", lambda, "kernel mixing weight: auto or fixed:<v>");
  auto* o_inner = app.add_option("--inner-samples", inner, "uniform samples for the continuous inner search")
                      ->check(CLI::PositiveNumber);
  app.add_flag("--oracle", o.oracle, "also run the per-combination oracle");
  auto* o_cap = app.add_option("--combo-cap", cap, "largest allowed number of category combinations");
  auto* o_workers = app.add_option("--workers", workers, "parallel trials")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", quiet, "no progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*o_obj) o.objective = objective;
  if (*o_trials) o.trials = trials;
  if (*o_iters) o.iterations = iters;
  if (*o_seed) o.seed = seed;
  if (*o_out) o.out = out;
  if (*o_init) o.init = init;
  if (*o_lambda) o.lambda = lambda;
  if (*o_inner) o.inner_samples = inner;
  if (*o_cap) o.combo_cap = cap;
  if (*o_workers) o.workers = workers;

  vpbo::ExperimentConfig cfg;
  try {
    bool out_in_file = false;
    if (!config_path.empty()) {
      cfg = vpbo::load_config(config_path);
      out_in_file = nlohmann::json::parse(vpbo::read_file(config_path)).contains("out");
    }
    vpbo::apply_overrides(cfg, o, out_in_file);
    cfg.validate();
  } catch (const vpbo::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    const auto res = vpbo::run_experiment(cfg, quiet ? nullptr : &std::cerr);
    for (const auto& [id, a] : res.outputs.summaries) {
      std::cout << id << ": mean best after " << a.size() - 1 << " iterations " << vpbo::format_double(a.mean.back())
                << " (stderr " << vpbo::format_double(a.std_error.back()) << ")\n";
    }
    for (const auto& f : res.failures) std::cerr << "failed: " << f.strategy << " trial " << f.trial << ": " << f.message << "\n";
    std::cout << "outputs in " << cfg.out_dir.string() << "\n";
    return res.exit_code();
  } catch (const vpbo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vpbo::CapacityError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
