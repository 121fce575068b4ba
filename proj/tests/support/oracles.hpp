#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the library's kernel or GP code paths.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "vpbo/gp.hpp"

namespace vpbo::ref {

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Matern-5/2 written as a polynomial in sqrt(5) r / l times exp.
inline long double matern52_ref(long double r, long double variance) {
  const long double a = std::sqrt(5.0L) * r;
  return variance * std::exp(-a) * (3.0L + 3.0L * a + a * a) / 3.0L;
}

inline long double kernel_ref(const MixedPoint& a, const MixedPoint& b, const KernelParams& p) {
  long double r2 = 0.0L;
  for (Eigen::Index i = 0; i < a.x.size(); ++i) {
    const long double d = (static_cast<long double>(a.x[i]) - b.x[i]) / p.lengthscales[i];
    r2 += d * d;
  }
  const long double kx = matern52_ref(std::sqrt(r2), p.cont_variance);
  if (a.h.empty()) return kx;
  long double m = 0.0L;
  for (std::size_t j = 0; j < a.h.size(); ++j) m += a.h[j] == b.h[j];
  const long double kh = p.cat_variance * m / static_cast<long double>(a.h.size());
  const long double lam = p.lambda;
  return (1.0L - lam) * (kh + kx) + lam * kh * kx;
}

/// Gram matrix with noise and jitter = 1e-8 trace/n on the diagonal.
inline LMat gram_ref(const std::vector<MixedPoint>& pts, const KernelParams& p, long double* jitter_out = nullptr) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  LMat k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel_ref(pts[i], pts[j], p);
  k.diagonal().array() += static_cast<long double>(p.noise_variance);
  const long double jitter = 1e-8L * k.trace() / static_cast<long double>(n);
  k.diagonal().array() += jitter;
  if (jitter_out) *jitter_out = jitter;
  return k;
}

struct NormalisedRef {
  LVec y;
  long double mean = 0.0L;
  long double std = 1.0L;
};

inline NormalisedRef normalise_ref(const std::vector<double>& v) {
  NormalisedRef r;
  const auto n = static_cast<Eigen::Index>(v.size());
  for (double x : v) r.mean += x;
  r.mean /= n;
  long double ss = 0.0L;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::max(std::sqrt(ss / n), 1e-12L);
  r.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) r.y[i] = (v[static_cast<std::size_t>(i)] - r.mean) / r.std;
  return r;
}

/// Posterior by explicit inverse of the Gram matrix.
struct DensePosterior {
  std::vector<long double> mean;
  std::vector<long double> variance;
};

inline DensePosterior dense_posterior(const ObservationSet& data, const KernelParams& p,
                                      const std::vector<MixedPoint>& query) {
  const LMat kinv = gram_ref(data.points(), p).inverse();
  const auto norm = normalise_ref(data.values());
  const LVec alpha = kinv * norm.y;
  DensePosterior out;
  const auto n = static_cast<Eigen::Index>(data.size());
  for (const auto& z : query) {
    LVec ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel_ref(data.points()[static_cast<std::size_t>(i)], z, p);
    out.mean.push_back(norm.mean + norm.std * ks.dot(alpha));
    out.variance.push_back(norm.std * norm.std * (kernel_ref(z, z, p) - ks.dot(kinv * ks)));
  }
  return out;
}

/// -1/2 y^T K^{-1} y - 1/2 log det K - n/2 log 2 pi with determinant and inverse
/// from an LU decomposition.
inline long double dense_lml(const ObservationSet& data, const KernelParams& p) {
  const LMat k = gram_ref(data.points(), p);
  const auto norm = normalise_ref(data.values());
  const Eigen::PartialPivLU<LMat> lu(k);
  const long double quad = norm.y.dot(lu.inverse() * norm.y);
  const long double n = static_cast<long double>(data.size());
  return -0.5L * quad - 0.5L * std::log(lu.determinant()) - 0.5L * n * std::log(2.0L * std::numbers::pi_v<long double>);
}

/// |a - b| / max(|b|, scale).
inline double rel_err(long double a, long double b, long double scale) {
  return static_cast<double>(std::abs(a - b) / std::max(std::abs(b), scale));
}

inline KernelParams random_params(int cont_dim, Stream& rng) {
  KernelParams p = KernelParams::defaults(cont_dim);
  for (int i = 0; i < cont_dim; ++i) p.lengthscales[i] = std::exp(rng.uniform(std::log(0.05), std::log(1.0)));
  p.lambda = rng.uniform();
  p.cat_variance = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
  p.cont_variance = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
  p.noise_variance = std::exp(rng.uniform(std::log(1e-6), std::log(1e-2)));
  return p;
}

inline CategorySpace random_space(Stream& rng) {
  std::vector<int> card(static_cast<std::size_t>(1 + rng.uniform_int(3)));
  for (auto& c : card) c = 2 + rng.uniform_int(4);
  return CategorySpace(card, 1 + rng.uniform_int(3));
}

inline ObservationSet random_dataset(const CategorySpace& space, int n, Stream& rng) {
  ObservationSet d(space);
  for (int i = 0; i < n; ++i) {
    MixedPoint z = uniform_point(space, rng);
    const double y = std::sin(6.0 * z.x.sum()) + 0.3 * (z.h.empty() ? 0 : z.h[0]) + 0.1 * rng.normal();
    d.add(std::move(z), y);
  }
  return d;
}

/// Central finite-difference gradient of the LML over the layout's vector.
inline Eigen::VectorXd fd_gradient(const ObservationSet& data, const KernelParams& p, const HyperLayout& layout,
                                   double step = 1e-5) {
  const MarginalLikelihood ml(data);
  const Eigen::VectorXd theta = layout.pack(p);
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd a = theta, b = theta;
    a[i] += step;
    b[i] -= step;
    g[i] = (ml.evaluate(layout.unpack(a, p), layout, false).lml - ml.evaluate(layout.unpack(b, p), layout, false).lml) /
           (2.0 * step);
  }
  return g;
}

} // namespace vpbo::ref
