#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "vpbo/vpbo.hpp"

namespace vpbo {

struct OracleOptions {
  /// Random restarts of the multi-start hyperparameter optimisation, which
  /// runs every `hyper_period` iterations. The iterations in between refine
  /// the previous hyperparameters by a single ascent.
  int restarts = 2;
  int hyper_period = 10;
  int inner_samples = 200;
};

/// Per-arm and across-arm best-so-far of the oracle reference agent.
struct OracleResult {
  std::uint64_t seed = 0;
  std::vector<double> trace;                  // t = 1..T: max over arms
  double initial_best = 0.0;                  // max over arms of each arm's initial design
  std::vector<std::vector<double>> arm_trace; // [combo][t-1]
  std::vector<double> arm_final;              // per combo, best after T

  double best_at(int t) const { return t <= 0 ? initial_best : trace.at(static_cast<std::size_t>(t - 1)); }
};

/// Runs an independent continuous EI-BO (own GP, own random initial design)
/// for every combination. The oracle value at t is the best value found by
/// any arm after t iterations.
inline OracleResult oracle_run(const ObjectiveFn& objective, const CategorySpace& space, int iterations,
                               int init_budget, std::uint64_t seed, const OracleOptions& oopt = {},
                               std::size_t combo_cap = kDefaultComboCap) {
  const auto combos = enumerate_combinations(space, combo_cap);
  const CategorySpace arm_space({}, space.cont_dim());
  OracleResult out;
  out.seed = seed;
  out.trace.assign(static_cast<std::size_t>(iterations), -std::numeric_limits<double>::infinity());
  out.initial_best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < combos.size(); ++c) {
    EngineOptions opt;
    opt.init_budget = init_budget;
    opt.init = InitMode::Random;
    opt.hyper_period = oopt.hyper_period;
    opt.refine_period = 1;
    opt.hyperopt.restarts = oopt.restarts;
    opt.inner_samples = oopt.inner_samples;
    opt.horizon = iterations;
    VpboStrategy arm(opt, "oracle-arm");
    const auto& h = combos[c];
    ObjectiveFn g = [&objective, h](const MixedPoint& z) { return objective(MixedPoint{h, z.x}); };
    arm.initialise(g, arm_space, derive_seed(seed, "oracle-arm", {c}));
    for (int t = 0; t < iterations; ++t) arm.step(g);
    std::vector<double> tr;
    for (const auto& r : arm.trace().records) tr.push_back(r.best);
    out.initial_best = std::max(out.initial_best, arm.trace().initial_best());
    for (std::size_t t = 0; t < tr.size(); ++t) out.trace[t] = std::max(out.trace[t], tr[t]);
    out.arm_final.push_back(arm.trace().final_best());
    out.arm_trace.push_back(std::move(tr));
  }
  return out;
}

/// Combination indices ordered by mean final oracle value across trials,
/// best first; ties go to the lower index.
inline std::vector<std::size_t> oracle_ranking(const std::vector<OracleResult>& runs) {
  if (runs.empty()) return {};
  const std::size_t c = runs.front().arm_final.size();
  std::vector<double> mean(c, 0.0);
  for (const auto& r : runs)
    for (std::size_t i = 0; i < c; ++i) mean[i] += r.arm_final.at(i) / static_cast<double>(runs.size());
  std::vector<std::size_t> idx(c);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  return idx;
}

} // namespace vpbo
