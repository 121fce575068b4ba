#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>

#include "vpbo/gp.hpp"
#include "vpbo/random.hpp"

namespace vpbo {

struct Interval {
  double lo;
  double hi;
};

/// Box on the unconstrained (log-space) hyperparameters. logit(lambda) is unbounded.
struct HyperBounds {
  Interval log_lengthscale{std::log(1e-2), std::log(10.0)};
  Interval log_variance{std::log(1e-3), std::log(1e3)};
  Interval log_noise{std::log(kNoiseFloor), 0.0};
};

struct HyperoptOptions {
  int restarts = 10;
  int max_iterations = 100;
  double gradient_tolerance = 1e-5;
  bool learn_lambda = true;
  HyperBounds bounds;
};

struct HyperoptResult {
  KernelParams params;
  double lml = -std::numeric_limits<double>::infinity();
  bool all_failed = false;
};

namespace detail {

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Box(const HyperLayout& layout, const HyperBounds& b) {
    const double inf = std::numeric_limits<double>::infinity();
    lo = Eigen::VectorXd::Constant(layout.size(), -inf);
    hi = Eigen::VectorXd::Constant(layout.size(), inf);
    for (int i = 0; i < layout.cont_dim; ++i) {
      lo[i] = b.log_lengthscale.lo;
      hi[i] = b.log_lengthscale.hi;
    }
    lo[layout.cont_variance_index()] = b.log_variance.lo;
    hi[layout.cont_variance_index()] = b.log_variance.hi;
    if (layout.has_categorical) {
      lo[layout.cat_variance_index()] = b.log_variance.lo;
      hi[layout.cat_variance_index()] = b.log_variance.hi;
    }
    lo[layout.noise_index()] = b.log_noise.lo;
    hi[layout.noise_index()] = b.log_noise.hi;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& v) const { return v.cwiseMax(lo).cwiseMin(hi); }

  /// Gradient with components that push against an active bound removed.
  Eigen::VectorXd projected_gradient(const Eigen::VectorXd& v, const Eigen::VectorXd& g) const {
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] <= lo[i] && g[i] < 0.0) pg[i] = 0.0;
      if (v[i] >= hi[i] && g[i] > 0.0) pg[i] = 0.0;
    }
    return pg;
  }

  Eigen::VectorXd sample(const HyperLayout& layout, Stream& rng) const {
    Eigen::VectorXd v(lo.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i == layout.lambda_index()) {
        const double lambda = rng.uniform(0.05, 0.95);
        v[i] = std::log(lambda / (1.0 - lambda));
      } else {
        v[i] = rng.uniform(lo[i], hi[i]);
      }
    }
    return v;
  }
};

struct AscentResult {
  Eigen::VectorXd theta;
  double lml = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
};

/// Projected ascent with backtracking (Armijo) line search. The direction is
/// the gradient preconditioned by a BFGS inverse-Hessian estimate, reset to the
/// plain gradient whenever it stops being an ascent direction. Trial points of
/// the line search are scored by value only; the gradient is computed once per
/// accepted step.
inline std::optional<AscentResult> ascend(const MarginalLikelihood& ml, const HyperLayout& layout,
                                          const KernelParams& base, const Box& box, Eigen::VectorXd theta,
                                          const HyperoptOptions& opt) {
  auto eval = [&](const Eigen::VectorXd& t, bool grad) -> std::optional<MarginalLikelihood::Value> {
    try {
      auto v = ml.evaluate(layout.unpack(t, base), layout, grad);
      if (!std::isfinite(v.lml) || (grad && !v.gradient.allFinite())) return std::nullopt;
      return v;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  const Eigen::Index m = theta.size();
  constexpr double kMaxMove = 2.0; // largest change of any log-parameter per step
  theta = box.project(theta);
  auto cur = eval(theta, true);
  if (!cur) return std::nullopt;
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(m, m);
  bool fresh = true;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd pg = box.projected_gradient(theta, cur->gradient);
    if (pg.norm() < opt.gradient_tolerance) break;

    Eigen::VectorXd dir = inv_h * pg;
    for (Eigen::Index i = 0; i < m; ++i)
      if (pg[i] == 0.0) dir[i] = 0.0;
    if (!(dir.dot(pg) > 0.0)) {
      inv_h.setIdentity();
      dir = pg;
      fresh = true;
    }
    double step = fresh ? std::min(1.0, 0.5 / std::max(dir.lpNorm<Eigen::Infinity>(), 1e-12)) : 1.0;
    step = std::min(step, kMaxMove / std::max(dir.lpNorm<Eigen::Infinity>(), 1e-12));

    bool accepted = false;
    Eigen::VectorXd cand;
    for (int ls = 0; ls < 40; ++ls) {
      cand = box.project(theta + step * dir);
      const double rise = pg.dot(cand - theta);
      if (rise <= 0.0) break;
      auto v = eval(cand, false);
      if (v && v->lml >= cur->lml + 1e-4 * rise) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (fresh) break;
      inv_h.setIdentity(); // retry once along the plain gradient
      fresh = true;
      continue;
    }
    auto next = eval(cand, true);
    if (!next) break;
    const Eigen::VectorXd s = cand - theta;
    const Eigen::VectorXd y = cur->gradient - next->gradient; // gradient change of -lml
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      if (fresh) inv_h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(m, m) - rho * s * y.transpose();
      inv_h = e * inv_h * e.transpose() + rho * s * s.transpose();
      fresh = false;
    }
    theta = cand;
    cur = std::move(next);
  }
  return AscentResult{theta, cur->lml, box.projected_gradient(theta, cur->gradient)};
}

} // namespace detail

/// Multi-start gradient ascent on the log marginal likelihood. Starts from the
/// incumbent parameters and `restarts` random points inside the bounds; keeps
/// the best. Restart r draws from its own child stream.
inline HyperoptResult optimize_hyperparameters(const ObservationSet& data, const KernelParams& incumbent,
                                               const HyperoptOptions& opt, const Stream& rng) {
  if (opt.restarts < 1) throw ContractError("hyperparameter optimisation needs at least one restart");
  const MarginalLikelihood ml(data);
  const HyperLayout layout(incumbent.lengthscales.size(), ml.has_categorical(), opt.learn_lambda);
  const detail::Box box(layout, opt.bounds);

  HyperoptResult best;
  best.params = incumbent;
  bool any = false;
  auto consider = [&](const Eigen::VectorXd& start) {
    auto r = detail::ascend(ml, layout, incumbent, box, start, opt);
    if (r && (!any || r->lml > best.lml)) {
      best.params = layout.unpack(r->theta, incumbent);
      best.lml = r->lml;
      any = true;
    }
  };
  consider(layout.pack(incumbent));
  for (int r = 0; r < opt.restarts; ++r) {
    Stream s = rng.child("restart", {static_cast<std::uint64_t>(r)});
    consider(box.sample(layout, s));
  }
  best.all_failed = !any;
  return best;
}

/// Single ascent from the incumbent parameters (no random restarts).
inline HyperoptResult refine_hyperparameters(const ObservationSet& data, const KernelParams& incumbent,
                                             const HyperoptOptions& opt) {
  const MarginalLikelihood ml(data);
  const HyperLayout layout(incumbent.lengthscales.size(), ml.has_categorical(), opt.learn_lambda);
  const detail::Box box(layout, opt.bounds);
  HyperoptResult out;
  out.params = incumbent;
  auto r = detail::ascend(ml, layout, incumbent, box, layout.pack(incumbent), opt);
  if (r) {
    out.params = layout.unpack(r->theta, incumbent);
    out.lml = r->lml;
  }
  out.all_failed = !r;
  return out;
}

} // namespace vpbo
