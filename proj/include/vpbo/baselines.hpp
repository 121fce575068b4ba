#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "vpbo/strategy.hpp"

namespace vpbo {

/// RandomBO: a uniformly random combination each iteration, continuous part
/// by UCB on the mixed-kernel GP.
class RandomBanditStrategy : public StrategyBase {
public:
  explicit RandomBanditStrategy(EngineOptions opt = {}, std::string name = "random")
      : StrategyBase(std::move(name), std::move(opt)) {}

protected:
  Decision decide() override {
    Model m = refresh_model();
    const auto t = static_cast<std::uint64_t>(t_);
    Stream arm = stream("random-arm", {t});
    const std::size_t combo = static_cast<std::size_t>(arm.uniform_int(static_cast<int>(space_.combination_count())));
    const auto h = space_.combo_vector(combo);
    Stream cs = stream("random-candidates", {t});
    const auto cands = draw_candidates(opt_.inner_samples, space_.cont_dim(), cs);
    const double k = opt_.ucb_k;
    const auto best = maximise_over(m.gp, h, cands, [k](double mu, double var) { return ucb(mu, var, k); });
    return Decision{MixedPoint{h, best.x}, combo, std::move(m.gp), m.params, m.hyperopt};
  }
};

/// EXP3 over the N arms of one categorical variable, with log-domain weights.
class Exp3Bandit {
public:
  Exp3Bandit(int arms, int horizon) : log_w_(static_cast<std::size_t>(arms), 0.0) {
    if (arms < 1) throw ContractError("EXP3 needs at least one arm");
    gamma_ = mixing_coefficient(arms, horizon);
  }

  /// min(1, sqrt(N log N / ((e - 1) T))).
  static double mixing_coefficient(int arms, int horizon) {
    if (arms <= 1) return 0.0;
    const double n = arms;
    return std::min(1.0, std::sqrt(n * std::log(n) / ((std::numbers::e - 1.0) * std::max(horizon, 1))));
  }

  int arms() const { return static_cast<int>(log_w_.size()); }
  double gamma() const { return gamma_; }

  std::vector<double> probabilities() const {
    const double mx = *std::max_element(log_w_.begin(), log_w_.end());
    std::vector<double> p(log_w_.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(log_w_[i] - mx));
    const double n = static_cast<double>(p.size());
    for (auto& v : p) v = (1.0 - gamma_) * v / sum + gamma_ / n;
    return p;
  }

  int sample(Stream& rng) const {
    const auto p = probabilities();
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
  }

  /// Importance-weighted update of the pulled arm; reward in [0, 1].
  void update(int arm, double reward) {
    const auto p = probabilities();
    const double n = static_cast<double>(log_w_.size());
    log_w_[static_cast<std::size_t>(arm)] += gamma_ * (reward / p[static_cast<std::size_t>(arm)]) / n;
  }

private:
  std::vector<double> log_w_;
  double gamma_ = 0.0;
};

/// One EXP3 bandit per categorical variable; continuous part by UCB on the
/// shared mixed-kernel GP. Rewards are rescaled by the running min/max of all
/// observed values.
class Exp3BanditStrategy : public StrategyBase {
public:
  explicit Exp3BanditStrategy(EngineOptions opt = {}, std::string name = "exp3")
      : StrategyBase(std::move(name), std::move(opt)) {}

  const std::vector<Exp3Bandit>& bandits() const { return bandits_; }

protected:
  void on_initialised() override {
    bandits_.clear();
    for (int n : space_.cardinalities()) bandits_.emplace_back(n, opt_.horizon);
  }

  Decision decide() override {
    Model m = refresh_model();
    const auto t = static_cast<std::uint64_t>(t_);
    std::vector<int> h(bandits_.size());
    for (std::size_t j = 0; j < bandits_.size(); ++j) {
      Stream s = stream("exp3-arm", {t, j});
      h[j] = bandits_[j].sample(s);
    }
    Stream cs = stream("exp3-candidates", {t});
    const auto cands = draw_candidates(opt_.inner_samples, space_.cont_dim(), cs);
    const double k = opt_.ucb_k;
    const auto best = maximise_over(m.gp, h, cands, [k](double mu, double var) { return ucb(mu, var, k); });
    const std::size_t combo = space_.combo_index(h);
    return Decision{MixedPoint{h, best.x}, combo, std::move(m.gp), m.params, m.hyperopt};
  }

  void after_query(const Decision& d, double) override {
    const auto& ys = data_.values();
    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    const double y = ys.back();
    const double reward = *hi > *lo ? (y - *lo) / (*hi - *lo) : 0.5;
    for (std::size_t j = 0; j < bandits_.size(); ++j) bandits_[j].update(d.z.h[j], reward);
  }

private:
  std::vector<Exp3Bandit> bandits_;
};

// ---------------------------------------------------------------------------
// One-hot relaxation.

inline int onehot_width(const CategorySpace& space) {
  int w = 0;
  for (int n : space.cardinalities()) w += n;
  return w;
}

/// [one-hot(h_1), ..., one-hot(h_k), x].
inline Eigen::VectorXd onehot_encode(const CategorySpace& space, const std::vector<int>& h, const Eigen::VectorXd& x) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(onehot_width(space) + x.size());
  int off = 0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    v[off + h[j]] = 1.0;
    off += space.cardinalities()[j];
  }
  v.tail(x.size()) = x;
  return v;
}

/// Per-variable argmax over each relaxed one-hot block (ties to the lowest index).
inline std::vector<int> onehot_decode(const CategorySpace& space, const Eigen::VectorXd& relaxed) {
  if (relaxed.size() < onehot_width(space)) throw DimensionError("relaxed vector shorter than the one-hot encoding");
  std::vector<int> h;
  int off = 0;
  for (int n : space.cardinalities()) {
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (relaxed[off + i] > relaxed[off + best]) best = i;
    h.push_back(best);
    off += n;
  }
  return h;
}

/// GP with a Matern-5/2 kernel over the concatenation of one-hot(h) and x.
/// UCB is maximised over uniform samples of the relaxed cube, and the
/// categorical block is decoded by argmax before querying.
class OneHotStrategy : public StrategyBase {
public:
  explicit OneHotStrategy(EngineOptions opt = {}, std::string name = "onehot")
      : StrategyBase(std::move(name), std::move(opt)) {}

protected:
  void on_initialised() override {
    encoded_ = ObservationSet(CategorySpace({}, onehot_width(space_) + space_.cont_dim()));
    for (std::size_t i = 0; i < data_.size(); ++i) encoded_.add(encode(data_.points()[i]), data_.values()[i]);
  }

  const ObservationSet& model_data() const override { return encoded_; }

  Decision decide() override {
    Model m = refresh_model();
    const auto t = static_cast<std::uint64_t>(t_);
    Stream cs = stream("onehot-candidates", {t});
    const int width = encoded_.space().cont_dim();
    const auto cands = draw_candidates(opt_.inner_samples, width, cs);
    const double k = opt_.ucb_k;
    const auto best = maximise_over(m.gp, {}, cands, [k](double mu, double var) { return ucb(mu, var, k); });
    MixedPoint z{onehot_decode(space_, best.x), best.x.tail(space_.cont_dim())};
    const std::size_t combo = space_.combo_index(z.h);
    return Decision{std::move(z), combo, std::move(m.gp), m.params, m.hyperopt};
  }

  void after_query(const Decision& d, double y) override { encoded_.add(encode(d.z), y); }

private:
  MixedPoint encode(const MixedPoint& z) const { return MixedPoint{{}, onehot_encode(space_, z.h, z.x)}; }

  ObservationSet encoded_;
};

} // namespace vpbo
