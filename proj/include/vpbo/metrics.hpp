#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "vpbo/strategy.hpp"

namespace vpbo {

/// Per-iteration mean and standard error of a set of curves.
struct Aggregate {
  std::vector<double> mean;
  std::vector<double> std_error;

  std::size_t size() const { return mean.size(); }
};

/// Best-so-far after t = 0..T iterations; entry 0 is the initial design.
inline std::vector<double> best_curve(const Trace& trace) {
  std::vector<double> c;
  c.reserve(trace.records.size() + 1);
  for (int t = 0; t <= static_cast<int>(trace.records.size()); ++t) c.push_back(trace.best_at(t));
  return c;
}

/// stderr = sample standard deviation / sqrt(n); zero for a single curve.
inline Aggregate aggregate_curves(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw AggregationError("no traces to aggregate");
  const std::size_t len = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != len)
      throw AggregationError("ragged traces: lengths " + std::to_string(len) + " and " + std::to_string(c.size()));
  }
  const double n = static_cast<double>(curves.size());
  Aggregate a;
  a.mean.assign(len, 0.0);
  a.std_error.assign(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double s = 0.0;
    for (const auto& c : curves) s += c[t];
    const double m = s / n;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c[t] - m) * (c[t] - m);
    a.mean[t] = m;
    a.std_error[t] = curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
  return a;
}

inline Aggregate aggregate_traces(const std::vector<Trace>& traces) {
  std::vector<std::vector<double>> curves;
  curves.reserve(traces.size());
  for (const auto& t : traces) curves.push_back(best_curve(t));
  return aggregate_curves(curves);
}

/// Fraction of iterations in [t_from, t_to] (1-based, inclusive) whose
/// combination is among the first `top_n` of `ranking`, averaged over traces.
/// t_to <= 0 means the last iteration.
inline double arm_pull_frequency(const std::vector<Trace>& traces, const std::vector<std::size_t>& ranking,
                                 int top_n = 5, int t_from = 1, int t_to = 0) {
  if (traces.empty()) throw AggregationError("no traces for arm pull frequency");
  if (ranking.empty()) throw ContractError("arm pull frequency needs an oracle ranking");
  if (top_n < 1) throw ContractError("top_n must be >= 1");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_n), ranking.size());
  std::vector<bool> top(*std::max_element(ranking.begin(), ranking.end()) + 1, false);
  for (std::size_t i = 0; i < k; ++i) top[ranking[i]] = true;

  double total = 0.0;
  for (const auto& tr : traces) {
    const int last = t_to > 0 ? std::min<int>(t_to, static_cast<int>(tr.records.size())) : static_cast<int>(tr.records.size());
    const int first = std::max(t_from, 1);
    if (last < first) throw AggregationError("empty iteration window for arm pull frequency");
    int hits = 0;
    for (int t = first; t <= last; ++t) {
      const std::size_t c = tr.records[static_cast<std::size_t>(t - 1)].combo;
      hits += c < top.size() && top[c];
    }
    total += static_cast<double>(hits) / (last - first + 1);
  }
  return total / static_cast<double>(traces.size());
}

/// Whether `reward` is within `threshold` of the best reference optimum after
/// shifting every value so that the smallest reference optimum is 0.
inline bool is_good_choice(double reward, const std::vector<double>& reference_optima, double threshold) {
  if (reference_optima.empty()) throw ContractError("empty reference optimum table");
  const auto [lo, hi] = std::minmax_element(reference_optima.begin(), reference_optima.end());
  return reward - *lo >= threshold * (*hi - *lo);
}

/// Per iteration t = 1..T: fraction of traces whose reward y_t is a good choice.
inline std::vector<double> good_choice_frequency(const std::vector<Trace>& traces,
                                                 const std::vector<double>& reference_optima, double threshold = 0.95) {
  if (traces.empty()) throw AggregationError("no traces for good-choice frequency");
  const std::size_t len = traces.front().records.size();
  std::vector<double> f(len, 0.0);
  for (const auto& tr : traces) {
    if (tr.records.size() != len) throw AggregationError("ragged traces in good-choice frequency");
    for (std::size_t t = 0; t < len; ++t) f[t] += is_good_choice(tr.records[t].y, reference_optima, threshold);
  }
  for (auto& v : f) v /= static_cast<double>(traces.size());
  return f;
}

/// Mean iteration overhead (objective time excluded): over all iterations, and
/// split by whether hyperparameters were re-optimised on that iteration.
struct Wallclock {
  double overall = 0.0;
  std::optional<double> hyperopt;
  std::optional<double> plain;
  std::size_t iterations = 0;
};

inline Wallclock wallclock_report(const std::vector<Trace>& traces) {
  double all = 0.0, hy = 0.0, pl = 0.0;
  std::size_t n = 0, nh = 0, np = 0;
  for (const auto& tr : traces) {
    for (const auto& r : tr.records) {
      all += r.overhead_s;
      ++n;
      if (r.hyperopt) {
        hy += r.overhead_s;
        ++nh;
      } else {
        pl += r.overhead_s;
        ++np;
      }
    }
  }
  Wallclock w;
  w.iterations = n;
  w.overall = n ? all / static_cast<double>(n) : 0.0;
  if (nh) w.hyperopt = hy / static_cast<double>(nh);
  if (np) w.plain = pl / static_cast<double>(np);
  return w;
}

} // namespace vpbo
