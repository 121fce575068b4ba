#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vpbo/acquisition.hpp"
#include "vpbo/benchmarks.hpp"
#include "vpbo/gp.hpp"
#include "vpbo/hyperopt.hpp"
#include "vpbo/random.hpp"
#include "vpbo/space.hpp"

namespace vpbo {

enum class InitMode { Random, Search };

/// Mixture weight handling: learned with the other hyperparameters, or pinned.
struct LambdaMode {
  bool learned = true;
  double fixed = 0.5;
};

struct EngineOptions {
  int init_budget = 24;
  InitMode init = InitMode::Random;
  int inner_samples = 200;
  /// Reuse one candidate set for every combination instead of fresh draws.
  bool share_candidates = false;
  /// Coordinate-wise golden-section refinement around the best candidate.
  bool local_refine = false;
  /// Re-optimise hyperparameters when t % period == 0 (t counts steps from 0).
  /// 0 keeps the initial hyperparameters forever.
  int hyper_period = 10;
  /// On the other steps, when t % refine_period == 0, run a single ascent from
  /// the current hyperparameters. 0 disables.
  int refine_period = 0;
  HyperoptOptions hyperopt;
  LambdaMode lambda;
  double ucb_k = 2.0;
  /// Total planned iterations T (EXP3 mixing coefficient).
  int horizon = 200;
  std::size_t combo_cap = kDefaultComboCap;
  int mes_samples = 10;
  int mes_grid = 500;
};

/// One optimisation iteration.
struct TrialRecord {
  int t = 0;
  MixedPoint z;
  double y = 0.0;
  double best = 0.0;
  std::size_t combo = 0;
  double overhead_s = 0.0;
  bool hyperopt = false;
};

struct Trace {
  std::string strategy;
  std::uint64_t seed = 0;
  ObservationSet init;
  std::vector<bool> init_searched; // per initial point: chosen by MES rather than at random
  std::vector<TrialRecord> records;

  double initial_best() const { return init.best(); }
  double final_best() const { return records.empty() ? initial_best() : records.back().best; }
  /// Best-so-far after t iterations (t = 0 is the initial design).
  double best_at(int t) const {
    if (t <= 0) return initial_best();
    return records.at(static_cast<std::size_t>(t - 1)).best;
  }
};

/// Common interface so the harness never needs to know which strategy runs.
class Strategy {
public:
  virtual ~Strategy() = default;
  virtual void initialise(const ObjectiveFn& objective, const CategorySpace& space, std::uint64_t seed) = 0;
  virtual void step(const ObjectiveFn& objective) = 0;
  virtual const Trace& trace() const = 0;
};

// ---------------------------------------------------------------------------

inline std::string describe_point(const MixedPoint& z) {
  std::ostringstream os;
  os << "h=[";
  for (std::size_t i = 0; i < z.h.size(); ++i) os << (i ? "," : "") << z.h[i];
  os << "] x=[";
  for (Eigen::Index i = 0; i < z.x.size(); ++i) os << (i ? "," : "") << z.x[i];
  os << "]";
  return os.str();
}

/// Calls the objective and rethrows any failure as EvaluationError naming the point.
inline double evaluate_at(const ObjectiveFn& f, const MixedPoint& z) {
  try {
    return f(z);
  } catch (const std::exception& e) {
    throw EvaluationError("objective failed at " + describe_point(z) + ": " + e.what());
  }
}

/// Best of a set of candidate continuous vectors for a fixed category vector.
struct CandidateMax {
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  int index = -1;
};

template <typename Acq>
CandidateMax maximise_over(const GPState& gp, const std::vector<int>& h, const std::vector<Eigen::VectorXd>& xs,
                           Acq&& acq) {
  std::vector<MixedPoint> pts;
  pts.reserve(xs.size());
  for (const auto& x : xs) pts.push_back(MixedPoint{h, x});
  const auto pred = predict_batch(gp, pts);
  CandidateMax best;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = acq(pred.mean[static_cast<Eigen::Index>(i)], pred.variance[static_cast<Eigen::Index>(i)]);
    if (best.index < 0 || v > best.value) {
      best.value = v;
      best.index = static_cast<int>(i);
    }
  }
  best.x = xs[static_cast<std::size_t>(best.index)];
  return best;
}

inline std::vector<Eigen::VectorXd> draw_candidates(int n, int dim, Stream& rng) {
  if (n < 1) throw ContractError("inner sample count must be >= 1");
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) xs.push_back(uniform_unit_vector(dim, rng));
  return xs;
}

/// One pass of golden-section search per coordinate inside +-radius of the
/// start. Only strict improvements are accepted.
template <typename Acq>
CandidateMax refine_locally(const GPState& gp, const std::vector<int>& h, CandidateMax start, Acq&& acq,
                            double radius = 0.05, int iterations = 20) {
  auto value_at = [&](const Eigen::VectorXd& x) {
    const auto p = predict(gp, MixedPoint{h, x});
    return acq(p.mean, p.variance);
  };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (Eigen::Index d = 0; d < start.x.size(); ++d) {
    double a = std::max(0.0, start.x[d] - radius);
    double b = std::min(1.0, start.x[d] + radius);
    Eigen::VectorXd probe = start.x;
    auto f = [&](double v) {
      probe[d] = v;
      return value_at(probe);
    };
    double c = b - g * (b - a), e = a + g * (b - a);
    double fc = f(c), fe = f(e);
    for (int it = 0; it < iterations; ++it) {
      if (fc > fe) {
        b = e;
        e = c;
        fe = fc;
        c = b - g * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = e;
        fc = fe;
        e = a + g * (b - a);
        fe = f(e);
      }
    }
    const double xm = fc > fe ? c : e;
    const double fm = std::max(fc, fe);
    if (fm > start.value) {
      start.x[d] = xm;
      start.value = fm;
    }
  }
  return start;
}

inline KernelParams initial_params(int cont_dim, const LambdaMode& lambda) {
  KernelParams p = KernelParams::defaults(cont_dim);
  p.lambda = lambda.learned ? 0.5 : lambda.fixed;
  return p;
}

// ---------------------------------------------------------------------------
// Initial designs.

struct InitResult {
  ObservationSet data;
  std::vector<bool> searched;
  bool failed = false;
  std::string error;
};

/// `budget` uniform random points, all drawn from the stream `rng`.
inline InitResult random_init(const ObjectiveFn& objective, const CategorySpace& space, int budget, Stream& rng) {
  if (budget < 1) throw ContractError("initial budget must be >= 1");
  InitResult r{ObservationSet(space), {}, false, {}};
  for (int i = 0; i < budget; ++i) {
    MixedPoint z = uniform_point(space, rng);
    try {
      const double y = evaluate_at(objective, z);
      r.data.add(std::move(z), y);
      r.searched.push_back(false);
    } catch (const EvaluationError& e) {
      r.failed = true;
      r.error = e.what();
      break;
    }
  }
  return r;
}

/// Result of one MES-guided choice of x for a fixed category vector.
struct MesChoice {
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<Eigen::VectorXd> grid;
  std::vector<double> values;
  std::vector<double> max_samples;
};

/// argmax of MES over `grid_size` uniform x at category vector h. Max-value
/// samples come from a Gumbel fit over `grid_size` uniform mixed points.
inline MesChoice mes_choose_x(const GPState& gp, const CategorySpace& space, const std::vector<int>& h,
                              int grid_size, int max_samples, Stream& grid_rng, Stream& max_rng) {
  MesChoice c;
  c.grid = draw_candidates(grid_size, space.cont_dim(), grid_rng);
  std::vector<MixedPoint> max_grid;
  max_grid.reserve(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) max_grid.push_back(uniform_point(space, max_rng));
  c.max_samples = sample_max_values(gp, max_grid, max_samples, max_rng);

  std::vector<MixedPoint> pts;
  for (const auto& x : c.grid) pts.push_back(MixedPoint{h, x});
  const auto pred = predict_batch(gp, pts);
  int best = -1;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v = mes(pred.mean[static_cast<Eigen::Index>(i)], pred.variance[static_cast<Eigen::Index>(i)],
                         c.max_samples);
    c.values.push_back(v);
    if (best < 0 || v > c.values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  c.x = c.grid[static_cast<std::size_t>(best)];
  c.value = c.values[static_cast<std::size_t>(best)];
  return c;
}

/// Two-phase initial design: the first budget/2 points uniform at random, the
/// rest with random h and x chosen by MES on a GP refit to everything observed
/// so far. Point j of the second phase uses child streams labelled with j.
inline InitResult search_initialize(const ObjectiveFn& objective, const CategorySpace& space, int budget,
                                    Stream& rng, const EngineOptions& opt = {}) {
  if (budget < 2 || budget % 2 != 0) throw ContractError("search initialisation needs an even budget >= 2");
  InitResult r = random_init(objective, space, budget / 2, rng);
  if (r.failed) return r;
  KernelParams params = initial_params(space.cont_dim(), opt.lambda);
  HyperoptOptions hopt = opt.hyperopt;
  hopt.learn_lambda = opt.lambda.learned;
  for (int j = budget / 2; j < budget; ++j) {
    const auto idx = static_cast<std::uint64_t>(j);
    std::vector<int> h = uniform_categories(space, rng);
    try {
      params = optimize_hyperparameters(r.data, params, hopt, rng.child("search-hyperopt", {idx})).params;
      const GPState gp = fit(r.data, params);
      Stream grid_rng = rng.child("search-grid", {idx});
      Stream max_rng = rng.child("search-max", {idx});
      auto choice = mes_choose_x(gp, space, h, opt.mes_grid, opt.mes_samples, grid_rng, max_rng);
      MixedPoint z{std::move(h), std::move(choice.x)};
      const double y = evaluate_at(objective, z);
      r.data.add(std::move(z), y);
      r.searched.push_back(true);
    } catch (const Error& e) {
      r.failed = true;
      r.error = e.what();
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

/// Shared state and the step skeleton (decide, query, commit). A step whose
/// objective call fails leaves every piece of state untouched.
class StrategyBase : public Strategy {
public:
  StrategyBase(std::string name, EngineOptions opt) : opt_(std::move(opt)), name_(std::move(name)) {}

  void initialise(const ObjectiveFn& objective, const CategorySpace& space, std::uint64_t seed) override {
    space_ = space;
    seed_ = seed;
    t_ = 0;
    Stream init_rng = Stream(seed).child("init");
    InitResult init = opt_.init == InitMode::Search ? search_initialize(objective, space, opt_.init_budget, init_rng, opt_)
                                                    : random_init(objective, space, opt_.init_budget, init_rng);
    if (init.failed) throw EvaluationError("initial design failed: " + init.error);
    data_ = init.data;
    trace_ = Trace{name_, seed, init.data, init.searched, {}};
    gp_.reset();
    on_initialised();
    params_ = initial_params(model_data().space().cont_dim(), opt_.lambda);
  }

  void step(const ObjectiveFn& objective) override {
    using clock = std::chrono::steady_clock;
    if (data_.empty()) throw ContractError("strategy must be initialised before stepping");
    const auto start = clock::now();
    Decision d = decide();
    const auto q0 = clock::now();
    const double y = evaluate_at(objective, d.z);
    const auto q1 = clock::now();
    const double prev_best = data_.best();
    data_.add(d.z, y);
    params_ = d.params;
    gp_ = std::move(d.gp);
    after_query(d, y);
    TrialRecord rec;
    rec.t = t_ + 1;
    rec.z = std::move(d.z);
    rec.y = y;
    rec.best = std::max(prev_best, y);
    rec.combo = d.combo;
    rec.hyperopt = d.hyperopt;
    const auto end = clock::now();
    rec.overhead_s = std::chrono::duration<double>((end - start) - (q1 - q0)).count();
    trace_.records.push_back(std::move(rec));
    ++t_;
  }

  const Trace& trace() const override { return trace_; }
  const ObservationSet& data() const { return data_; }
  const std::optional<GPState>& gp() const { return gp_; }
  const KernelParams& params() const { return params_; }
  int iteration() const { return t_; }
  const EngineOptions& options() const { return opt_; }
  const CategorySpace& space() const { return space_; }

protected:
  struct Decision {
    MixedPoint z;
    std::size_t combo = 0;
    GPState gp;
    KernelParams params;
    bool hyperopt = false;
  };

  struct Model {
    GPState gp;
    KernelParams params;
    bool hyperopt = false;
  };

  virtual Decision decide() = 0;
  virtual void after_query(const Decision&, double) {}
  virtual void on_initialised() {}
  /// Dataset the surrogate is trained on (differs from data_ for encodings).
  virtual const ObservationSet& model_data() const { return data_; }

  Stream stream(std::string_view label, std::initializer_list<std::uint64_t> idx = {}) const {
    return Stream(seed_).child(label, idx);
  }

  /// Refits the surrogate, re-optimising hyperparameters on schedule.
  Model refresh_model() const {
    Model m;
    m.params = params_;
    const auto& md = model_data();
    HyperoptOptions h = opt_.hyperopt;
    h.learn_lambda = opt_.lambda.learned;
    if (opt_.hyper_period > 0 && t_ % opt_.hyper_period == 0) {
      m.params = optimize_hyperparameters(md, params_, h, stream("hyperopt", {static_cast<std::uint64_t>(t_)})).params;
      m.hyperopt = true;
    } else if (opt_.refine_period > 0 && t_ % opt_.refine_period == 0) {
      m.params = refine_hyperparameters(md, params_, h).params;
      m.hyperopt = true;
    }
    try {
      m.gp = fit(md, m.params);
    } catch (const NumericalError&) {
      if (!m.hyperopt) throw;
      m.params = params_;
      m.gp = fit(md, m.params);
    }
    return m;
  }

  EngineOptions opt_;
  std::string name_;
  CategorySpace space_;
  std::uint64_t seed_ = 0;
  int t_ = 0;
  ObservationSet data_;
  std::optional<GPState> gp_;
  KernelParams params_;
  Trace trace_;
};

} // namespace vpbo
