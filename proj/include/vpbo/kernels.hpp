#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "vpbo/errors.hpp"
#include "vpbo/space.hpp"

namespace vpbo {

inline constexpr double kNoiseFloor = 1e-6;

/// Hyperparameters of the mixed categorical/continuous covariance.
///
/// The continuous part is an ARD Matern-5/2 kernel; nu is not a free
/// parameter. With no categorical variables the mixed kernel reduces to the
/// continuous kernel and `lambda`/`cat_variance` are ignored.
struct KernelParams {
  static constexpr double matern_nu = 2.5;

  double lambda = 0.5;
  double cat_variance = 1.0;
  double cont_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double noise_variance = kNoiseFloor;

  static KernelParams defaults(int cont_dim) {
    KernelParams p;
    p.lengthscales = Eigen::VectorXd::Constant(cont_dim, 0.2);
    return p;
  }

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in [0,1]");
    if (!(cat_variance > 0.0) || !(cont_variance > 0.0)) throw ContractError("kernel variances must be positive");
    if (lengthscales.size() == 0 || !(lengthscales.array() > 0.0).all())
      throw ContractError("lengthscales must be non-empty and positive");
    if (!(noise_variance >= kNoiseFloor)) throw ContractError("noise variance below the 1e-6 floor");
  }
};

/// Overlap kernel: (sigma2 / k) times the number of matching positions.
inline double categorical_kernel(std::span<const int> h, std::span<const int> h2, double sigma2) {
  if (h.size() != h2.size()) throw DimensionError("categorical vectors differ in length");
  if (h.empty()) throw DimensionError("categorical kernel needs at least one variable");
  int matches = 0;
  for (std::size_t i = 0; i < h.size(); ++i) matches += h[i] == h2[i] ? 1 : 0;
  return sigma2 * static_cast<double>(matches) / static_cast<double>(h.size());
}

/// Matern-5/2 profile as a function of the scaled distance r.
inline double matern52(double r, double variance) {
  const double s5r = std::sqrt(5.0) * r;
  return variance * (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
}

inline double scaled_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, const Eigen::VectorXd& ls) {
  if (x.size() != x2.size() || x.size() != ls.size())
    throw DimensionError("continuous vectors and lengthscales differ in length");
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = (x[i] - x2[i]) / ls[i];
    r2 += d * d;
  }
  return std::sqrt(r2);
}

inline double matern52_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, const KernelParams& p) {
  return matern52(scaled_distance(x, x2, p.lengthscales), p.cont_variance);
}

/// (1 - lambda)(k_h + k_x) + lambda k_h k_x.
inline double combine_mixed(double kh, double kx, double lambda) {
  return (1.0 - lambda) * (kh + kx) + lambda * kh * kx;
}

inline double mixed_kernel(const MixedPoint& z, const MixedPoint& z2, const KernelParams& p) {
  if (z.h.size() != z2.h.size()) throw DimensionError("points come from different category spaces");
  const double kx = matern52_kernel(z.x, z2.x, p);
  if (z.h.empty()) return kx;
  return combine_mixed(categorical_kernel(z.h, z2.h, p.cat_variance), kx, p.lambda);
}

/// Gram matrix with noise_variance + jitter on the diagonal. Each unordered
/// pair is evaluated once so the result is exactly symmetric.
inline Eigen::MatrixXd gram_matrix(const std::vector<MixedPoint>& points, const KernelParams& p, double jitter) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = mixed_kernel(points[i], points[i], p) + p.noise_variance + jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = mixed_kernel(points[i], points[j], p);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Cross-covariance between training points (rows) and query points (columns).
inline Eigen::MatrixXd cross_covariance(const std::vector<MixedPoint>& train, const std::vector<MixedPoint>& query,
                                        const KernelParams& p) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(query.size()));
  for (std::size_t j = 0; j < query.size(); ++j)
    for (std::size_t i = 0; i < train.size(); ++i)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mixed_kernel(train[i], query[j], p);
  return k;
}

/// Hyperparameter-independent pairwise statistics of a point set: the
/// categorical match fraction and per-dimension squared differences. Lets the
/// likelihood optimiser rebuild the Gram matrix without touching the points.
struct PairwiseStats {
  Eigen::MatrixXd match_fraction;           // n x n, empty when k = 0
  std::vector<Eigen::MatrixXd> sq_diff;     // one n x n matrix per continuous dimension

  static PairwiseStats from(const std::vector<MixedPoint>& points) {
    PairwiseStats s;
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n == 0) return s;
    const auto k = points.front().h.size();
    const auto d = points.front().x.size();
    if (k > 0) {
      s.match_fraction.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
          int m = 0;
          for (std::size_t q = 0; q < k; ++q) m += points[i].h[q] == points[j].h[q] ? 1 : 0;
          const double f = static_cast<double>(m) / static_cast<double>(k);
          s.match_fraction(i, j) = f;
          s.match_fraction(j, i) = f;
        }
    }
    s.sq_diff.assign(static_cast<std::size_t>(d), Eigen::MatrixXd(n, n));
    for (Eigen::Index q = 0; q < d; ++q) {
      auto& m = s.sq_diff[static_cast<std::size_t>(q)];
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double diff = points[i].x[q] - points[j].x[q];
          m(i, j) = diff * diff;
          m(j, i) = diff * diff;
        }
    }
    return s;
  }

  bool has_categorical() const { return match_fraction.size() > 0; }
};

} // namespace vpbo
