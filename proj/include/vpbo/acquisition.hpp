#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "vpbo/errors.hpp"
#include "vpbo/gp.hpp"
#include "vpbo/random.hpp"

namespace vpbo {

inline constexpr double kSigmaFloor = 1e-12;

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// log Phi(z), accurate in both tails.
inline double log_normal_cdf(double z) {
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z > -30.0) return std::log(normal_cdf(z));
  // asymptotic tail: Phi(z) ~ phi(z)/(-z) (1 - 1/z^2 + 3/z^4)
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

/// Best observed objective value y^max.
struct Incumbent {
  double value;
};

/// Closed-form expected improvement over the incumbent (maximisation).
/// Exactly zero when the posterior standard deviation is at most 1e-12.
inline double expected_improvement(double mean, double variance, Incumbent incumbent) {
  const double sigma = std::sqrt(std::max(variance, 0.0));
  if (sigma <= kSigmaFloor) return 0.0;
  const double delta = mean - incumbent.value;
  const double gamma = delta / sigma;
  return std::max(sigma * normal_pdf(gamma) + delta * normal_cdf(gamma), 0.0);
}

inline double ucb(double mean, double variance, double k) { return mean + k * std::sqrt(std::max(variance, 0.0)); }

/// Max-value entropy search: mean over sampled maxima y* of
/// gamma phi(gamma) / (2 Phi(gamma)) - log Phi(gamma), gamma = (y* - mu) / sigma.
inline double mes(double mean, double variance, std::span<const double> max_samples) {
  if (max_samples.empty()) throw ContractError("MES needs at least one max-value sample");
  const double sigma = std::sqrt(std::max(variance, 0.0));
  if (sigma <= kSigmaFloor) return 0.0;
  double acc = 0.0;
  for (double ystar : max_samples) {
    const double gamma = std::max((ystar - mean) / sigma, 1e-10);
    const double log_cdf = log_normal_cdf(gamma);
    const double term = gamma * normal_pdf(gamma) / (2.0 * std::exp(log_cdf)) - log_cdf;
    acc += std::max(term, 0.0);
  }
  return acc / static_cast<double>(max_samples.size());
}

namespace detail {

/// log P(max <= y) under independent Gaussian marginals.
inline double log_max_cdf(double y, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    if (sd[i] <= kSigmaFloor) {
      if (y < mean[i]) return -std::numeric_limits<double>::infinity();
      continue;
    }
    acc += log_normal_cdf((y - mean[i]) / sd[i]);
  }
  return acc;
}

inline double max_quantile(double q, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  const double target = std::log(q);
  double lo = (mean - 6.0 * sd).minCoeff();
  double hi = (mean + 6.0 * sd).maxCoeff();
  while (log_max_cdf(hi, mean, sd) < target) hi += (hi - lo) + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_max_cdf(mid, mean, sd) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

/// Gumbel approximation to the distribution of max_i f(grid_i) given the
/// posterior marginals. The Gumbel location/scale are matched to the 25/50/75%
/// quantiles of prod_i Phi((y - mu_i)/sd_i). Samples are clamped from below at
/// `floor` (pass the incumbent; -inf disables).
inline std::vector<double> sample_max_values(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, int count,
                                             Stream& rng,
                                             double floor = -std::numeric_limits<double>::infinity()) {
  if (mean.size() == 0 || mean.size() != sd.size()) throw ContractError("max-value sampling needs a non-empty grid");
  if (count < 1) throw ContractError("max-value sample count must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  if (sd.maxCoeff() <= kSigmaFloor) {
    std::fill(out.begin(), out.end(), std::max(mean.maxCoeff(), floor));
    return out;
  }
  const double q25 = detail::max_quantile(0.25, mean, sd);
  const double q50 = detail::max_quantile(0.50, mean, sd);
  const double q75 = detail::max_quantile(0.75, mean, sd);
  // Gumbel quantile: y_q = a - b log(-log q)
  const double b = std::max((q75 - q25) / (std::log(-std::log(0.25)) - std::log(-std::log(0.75))), 1e-12);
  const double a = q50 + b * std::log(-std::log(0.5));
  for (auto& y : out) {
    double u = rng.uniform();
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    y = std::max(a - b * std::log(-std::log(u)), floor);
  }
  return out;
}

/// Posterior-based overload: grid marginals come from `state`; samples are
/// floored at the best training target. Repeated grid points count once.
inline std::vector<double> sample_max_values(const GPState& state, const std::vector<MixedPoint>& grid, int count,
                                             Stream& rng) {
  if (grid.empty()) throw ContractError("max-value sampling needs a non-empty grid");
  auto less = [](const MixedPoint& a, const MixedPoint& b) {
    if (a.h != b.h) return a.h < b.h;
    return std::lexicographical_compare(a.x.data(), a.x.data() + a.x.size(), b.x.data(), b.x.data() + b.x.size());
  };
  std::vector<MixedPoint> unique = grid;
  std::sort(unique.begin(), unique.end(), less);
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  const auto pred = predict_batch(state, unique);
  return sample_max_values(pred.mean, pred.variance.cwiseSqrt(), count, rng, state.best_value());
}

} // namespace vpbo
