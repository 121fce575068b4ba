#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "vpbo/errors.hpp"
#include "vpbo/kernels.hpp"
#include "vpbo/space.hpp"

namespace vpbo {

/// The dataset D_t: evaluated points with their objective values.
class ObservationSet {
public:
  ObservationSet() = default;
  explicit ObservationSet(CategorySpace space) : space_(std::move(space)) {}

  const CategorySpace& space() const { return space_; }
  const std::vector<MixedPoint>& points() const { return points_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  void add(MixedPoint z, double y) {
    require_conforms(z, space_);
    points_.push_back(std::move(z));
    values_.push_back(y);
  }

  /// Incumbent y^max; -inf when empty.
  double best() const {
    double b = -std::numeric_limits<double>::infinity();
    for (double v : values_) b = std::max(b, v);
    return b;
  }

private:
  CategorySpace space_;
  std::vector<MixedPoint> points_;
  std::vector<double> values_;
};

/// A fitted surrogate. Immutable after `fit`; safe to share between readers.
struct GPState {
  KernelParams params;
  std::vector<MixedPoint> train_points;
  std::vector<double> train_values;
  double y_mean = 0.0;
  double y_std = 1.0;
  double jitter = 0.0;
  Eigen::MatrixXd chol;    // lower triangular
  Eigen::VectorXd weights; // K^{-1} y_normalised

  std::size_t size() const { return train_points.size(); }
  double best_value() const { return *std::max_element(train_values.begin(), train_values.end()); }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct BatchPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;     // clamped at 0
  Eigen::VectorXd raw_variance; // before clamping
};

namespace detail {

struct Normalised {
  Eigen::VectorXd y;
  double mean = 0.0;
  double std = 1.0;
};

inline Normalised normalise(const std::vector<double>& values) {
  Normalised out;
  const auto n = static_cast<Eigen::Index>(values.size());
  out.y.resize(n);
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  out.mean = m;
  out.std = std::max(std::sqrt(ss / static_cast<double>(n)), 1e-12);
  for (Eigen::Index i = 0; i < n; ++i) out.y[i] = (values[static_cast<std::size_t>(i)] - m) / out.std;
  return out;
}

inline std::string describe(const KernelParams& p) {
  std::ostringstream os;
  os << "lambda=" << p.lambda << " lengthscales=[";
  for (Eigen::Index i = 0; i < p.lengthscales.size(); ++i) os << (i ? "," : "") << p.lengthscales[i];
  os << "] cont_variance=" << p.cont_variance << " cat_variance=" << p.cat_variance
     << " noise=" << p.noise_variance;
  return os.str();
}

inline constexpr int kJitterEscalations = 4;

/// Factorises K + jitter I. Jitter starts at 1e-8 trace(K)/n and grows ten-fold
/// on each failure, at most four times.
inline Eigen::LLT<Eigen::MatrixXd> factorise(Eigen::MatrixXd k, const KernelParams& p, double& jitter) {
  const Eigen::Index n = k.rows();
  jitter = 1e-8 * k.trace() / static_cast<double>(n);
  if (!(jitter > 0.0) || !std::isfinite(jitter)) jitter = 1e-12;
  for (int attempt = 0; attempt <= kJitterEscalations; ++attempt) {
    if (k.allFinite()) {
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(kj);
      if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return llt;
    }
    if (attempt < kJitterEscalations) jitter *= 10.0;
  }
  throw NumericalError("Cholesky factorisation failed after jitter escalation (" + describe(p) + ")");
}

} // namespace detail

/// Exact GP fit on normalised targets.
inline GPState fit(const ObservationSet& data, const KernelParams& params) {
  if (data.empty()) throw ContractError("cannot fit a GP to an empty observation set");
  params.validate();
  GPState s;
  s.params = params;
  s.train_points = data.points();
  s.train_values = data.values();
  const auto norm = detail::normalise(data.values());
  s.y_mean = norm.mean;
  s.y_std = norm.std;
  auto llt = detail::factorise(gram_matrix(s.train_points, params, 0.0), params, s.jitter);
  s.chol = llt.matrixL();
  s.weights = llt.solve(norm.y);
  return s;
}

/// Posterior mean and latent-function variance at a batch of points, in
/// objective units.
inline BatchPrediction predict_batch(const GPState& s, const std::vector<MixedPoint>& query) {
  const Eigen::MatrixXd kq = cross_covariance(s.train_points, query, s.params);
  const Eigen::MatrixXd v = s.chol.triangularView<Eigen::Lower>().solve(kq);
  BatchPrediction out;
  const auto m = static_cast<Eigen::Index>(query.size());
  out.mean.resize(m);
  out.variance.resize(m);
  out.raw_variance.resize(m);
  const double var_scale = s.y_std * s.y_std;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double prior = mixed_kernel(query[static_cast<std::size_t>(j)], query[static_cast<std::size_t>(j)], s.params);
    out.mean[j] = s.y_mean + s.y_std * kq.col(j).dot(s.weights);
    out.raw_variance[j] = var_scale * (prior - v.col(j).squaredNorm());
    out.variance[j] = std::max(out.raw_variance[j], 0.0);
  }
  return out;
}

inline Prediction predict(const GPState& s, const MixedPoint& z) {
  const auto b = predict_batch(s, {z});
  return {b.mean[0], b.variance[0]};
}

// ---------------------------------------------------------------------------
// Unconstrained hyperparameter vector:
//   [log l_1..log l_d, log cont_variance, (log cat_variance), log noise, (logit lambda)]
// cat_variance is present only when the space has categorical variables and
// lambda only when it is learned.

struct HyperLayout {
  int cont_dim = 1;
  bool has_categorical = true;
  bool learn_lambda = true;

  HyperLayout() = default;
  HyperLayout(int d, bool categorical, bool lambda) : cont_dim(d), has_categorical(categorical),
                                                      learn_lambda(categorical && lambda) {}

  int size() const { return cont_dim + 2 + (has_categorical ? 1 : 0) + (learn_lambda ? 1 : 0); }
  int cont_variance_index() const { return cont_dim; }
  int cat_variance_index() const { return has_categorical ? cont_dim + 1 : -1; }
  int noise_index() const { return cont_dim + 1 + (has_categorical ? 1 : 0); }
  int lambda_index() const { return learn_lambda ? noise_index() + 1 : -1; }

  Eigen::VectorXd pack(const KernelParams& p) const {
    Eigen::VectorXd v(size());
    for (int i = 0; i < cont_dim; ++i) v[i] = std::log(p.lengthscales[i]);
    v[cont_variance_index()] = std::log(p.cont_variance);
    if (has_categorical) v[cat_variance_index()] = std::log(p.cat_variance);
    v[noise_index()] = std::log(p.noise_variance);
    if (learn_lambda) {
      const double l = std::clamp(p.lambda, 1e-12, 1.0 - 1e-12);
      v[lambda_index()] = std::log(l / (1.0 - l));
    }
    return v;
  }

  /// Fields absent from the layout are copied from `base`.
  KernelParams unpack(const Eigen::VectorXd& v, const KernelParams& base) const {
    KernelParams p = base;
    p.lengthscales.resize(cont_dim);
    for (int i = 0; i < cont_dim; ++i) p.lengthscales[i] = std::exp(v[i]);
    p.cont_variance = std::exp(v[cont_variance_index()]);
    if (has_categorical) p.cat_variance = std::exp(v[cat_variance_index()]);
    p.noise_variance = std::max(std::exp(v[noise_index()]), kNoiseFloor);
    if (learn_lambda) p.lambda = 1.0 / (1.0 + std::exp(-v[lambda_index()]));
    return p;
  }
};

/// Log marginal likelihood of a fixed dataset as a function of the kernel
/// hyperparameters, with its analytic gradient. Pairwise statistics are
/// computed once, so repeated evaluations cost one Cholesky and one inverse.
class MarginalLikelihood {
public:
  struct Value {
    double lml = 0.0;
    Eigen::VectorXd gradient; // over the layout's unconstrained vector; empty unless requested
  };

  explicit MarginalLikelihood(const ObservationSet& data)
      : stats_(PairwiseStats::from(data.points())), y_(detail::normalise(data.values()).y),
        categorical_(data.space().num_categorical() > 0) {
    if (data.empty()) throw ContractError("log marginal likelihood needs data");
  }

  Eigen::Index size() const { return y_.size(); }
  bool has_categorical() const { return categorical_; }

  Value evaluate(const KernelParams& p, const HyperLayout& layout, bool with_gradient) const {
    const Eigen::Index n = y_.size();
    const int d = static_cast<int>(stats_.sq_diff.size());
    if (p.lengthscales.size() != d) throw DimensionError("lengthscale count does not match the data");

    Eigen::ArrayXXd r2 = Eigen::ArrayXXd::Zero(n, n);
    for (int q = 0; q < d; ++q)
      r2 += stats_.sq_diff[static_cast<std::size_t>(q)].array() / (p.lengthscales[q] * p.lengthscales[q]);
    const Eigen::ArrayXXd r = r2.sqrt();
    const Eigen::ArrayXXd e = (-std::sqrt(5.0) * r).exp();
    const Eigen::ArrayXXd kx = p.cont_variance * (1.0 + std::sqrt(5.0) * r + (5.0 / 3.0) * r2) * e;

    Eigen::ArrayXXd kmat;
    Eigen::ArrayXXd kh;
    if (categorical_) {
      kh = p.cat_variance * stats_.match_fraction.array();
      kmat = (1.0 - p.lambda) * (kh + kx) + p.lambda * kh * kx;
    } else {
      kmat = kx;
    }
    Eigen::MatrixXd k = kmat.matrix();
    k.diagonal().array() += p.noise_variance;

    const double trace_k = k.trace();
    double jitter = 0.0;
    const auto llt = detail::factorise(std::move(k), p, jitter);
    const Eigen::VectorXd alpha = llt.solve(y_);
    const Eigen::MatrixXd& l = llt.matrixLLT();
    const double log_det_half = l.diagonal().array().log().sum();

    Value out;
    out.lml = -0.5 * y_.dot(alpha) - log_det_half - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::ArrayXXd w = (alpha * alpha.transpose() - kinv).array();
    const double tw = w.matrix().trace();
    const double jitter_per_trace = trace_k > 0.0 && std::isfinite(trace_k) ? jitter / trace_k : 0.0;
    auto contract = [&](const Eigen::ArrayXXd& dk) {
      return 0.5 * ((w * dk).sum() + tw * jitter_per_trace * dk.matrix().diagonal().sum());
    };

    out.gradient.resize(layout.size());
    // d k_mixed / d k_x and d k_mixed / d k_h
    Eigen::ArrayXXd dmix_dkx;
    Eigen::ArrayXXd dmix_dkh;
    if (categorical_) {
      dmix_dkx = (1.0 - p.lambda) + p.lambda * kh;
      dmix_dkh = (1.0 - p.lambda) + p.lambda * kx;
    } else {
      dmix_dkx = Eigen::ArrayXXd::Ones(n, n);
    }
    const Eigen::ArrayXXd radial = p.cont_variance * (5.0 / 3.0) * (1.0 + std::sqrt(5.0) * r) * e;
    for (int q = 0; q < d; ++q) {
      const double l2 = p.lengthscales[q] * p.lengthscales[q];
      out.gradient[q] = contract(radial * (stats_.sq_diff[static_cast<std::size_t>(q)].array() / l2) * dmix_dkx);
    }
    out.gradient[layout.cont_variance_index()] = contract(kx * dmix_dkx);
    if (categorical_) out.gradient[layout.cat_variance_index()] = contract(kh * dmix_dkh);
    out.gradient[layout.noise_index()] = 0.5 * p.noise_variance * tw * (1.0 + jitter_per_trace * static_cast<double>(n));
    if (layout.learn_lambda)
      out.gradient[layout.lambda_index()] = p.lambda * (1.0 - p.lambda) * contract(kh * kx - kh - kx);
    return out;
  }

private:
  PairwiseStats stats_;
  Eigen::VectorXd y_;
  bool categorical_;
};

/// -1/2 y^T K^{-1} y - sum log diag(L) - n/2 log 2 pi on normalised targets.
inline double log_marginal_likelihood(const ObservationSet& data, const KernelParams& params) {
  params.validate();
  const MarginalLikelihood ml(data);
  const HyperLayout layout(params.lengthscales.size(), ml.has_categorical(), false);
  return ml.evaluate(params, layout, false).lml;
}

/// Analytic gradient over the unconstrained vector described by HyperLayout.
inline Eigen::VectorXd lml_gradient(const ObservationSet& data, const KernelParams& params, bool learn_lambda = true) {
  params.validate();
  const MarginalLikelihood ml(data);
  const HyperLayout layout(params.lengthscales.size(), ml.has_categorical(), learn_lambda);
  return ml.evaluate(params, layout, true).gradient;
}

} // namespace vpbo
