// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: vpbo_acceptance <echo_objective> [work_dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <unistd.h>

#include <Eigen/Eigenvalues>

#include "support/oracles.hpp"
#include "support/trace_compare.hpp"
#include "vpbo/external_objective.hpp"
#include "vpbo/harness.hpp"

using namespace vpbo;
namespace fs = std::filesystem;

namespace {

constexpr double kFunc2cOptimum = 3.094885360470;

int failures = 0;

void report(int id, bool pass, const std::string& detail, double seconds) {
  std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. EI closed form against Monte Carlo.
void criterion_ei() {
  const auto t0 = std::chrono::steady_clock::now();
  Stream rng(101);
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double mu = rng.uniform(-5.0, 5.0);
    const double sigma = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    const double inc = mu + sigma * rng.uniform(-3.0, 3.0);
    const int m = 1000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < m; ++i) {
      const double v = std::max(0.0, mu + sigma * rng.normal() - inc);
      s += v;
      s2 += v * v;
    }
    const double mc = s / m;
    const double se = std::sqrt(std::max(s2 / m - mc * mc, 0.0) / m);
    const double cf = expected_improvement(mu, sigma * sigma, Incumbent{inc});
    const double excess = std::abs(cf - mc) - (1e-3 + 3.0 * se);
    worst = std::max(worst, std::abs(cf - mc) / (1e-3 + 3.0 * se));
    bad += excess > 0.0;
  }
  report(1, bad == 0, fmt("EI vs MC(1e6): %.0f/100 outside 1e-3 + 3 se; worst |diff|/bound %.3f", bad, worst),
         seconds_since(t0));
}

// 2. GP posterior and LML against dense direct solves.
void criterion_gp() {
  const auto t0 = std::chrono::steady_clock::now();
  Stream rng(102);
  double worst_mean = 0.0, worst_var = 0.0, worst_lml = 0.0;
  for (int k = 0; k < 50; ++k) {
    const CategorySpace space = ref::random_space(rng);
    const auto d = ref::random_dataset(space, 2 + rng.uniform_int(49), rng);
    const KernelParams p = ref::random_params(space.cont_dim(), rng);
    const auto s = fit(d, p);
    std::vector<MixedPoint> q;
    for (int i = 0; i < 20; ++i) q.push_back(uniform_point(space, rng));
    for (int i = 0; i < 5; ++i) q.push_back(d.points()[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(d.size())))]);
    const auto r = ref::dense_posterior(d, p, q);
    const auto got = predict_batch(s, q);
    const double vscale = s.y_std * s.y_std * (p.cat_variance + p.cont_variance);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      worst_mean = std::max(worst_mean, ref::rel_err(got.mean[ii], r.mean[i], s.y_std));
      worst_var = std::max(worst_var, ref::rel_err(got.raw_variance[ii], r.variance[i], vscale));
    }
    worst_lml = std::max(worst_lml, ref::rel_err(log_marginal_likelihood(d, p), ref::dense_lml(d, p), 1.0));
  }
  const bool pass = worst_mean <= 1e-8 && worst_var <= 1e-8 && worst_lml <= 1e-8;
  report(2, pass, fmt("50 datasets: worst rel err mean %.2e, variance %.2e, LML %.2e (tol 1e-8)", worst_mean, worst_var, worst_lml),
         seconds_since(t0));
}

// 3. Positive semi-definiteness of the mixed kernel before noise and jitter.
void criterion_psd() {
  const auto t0 = std::chrono::steady_clock::now();
  Stream rng(103);
  int bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const CategorySpace space = ref::random_space(rng);
    const int n = 2 + rng.uniform_int(29);
    KernelParams p = KernelParams::defaults(space.cont_dim());
    for (int i = 0; i < space.cont_dim(); ++i) p.lengthscales[i] = std::exp(rng.uniform(std::log(1e-2), std::log(10.0)));
    p.lambda = rng.uniform();
    p.cat_variance = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    p.cont_variance = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    p.noise_variance = 0.0;
    std::vector<MixedPoint> pts;
    for (int i = 0; i < n; ++i) {
      if (i > 0 && rng.uniform() < 0.2) pts.push_back(pts[static_cast<std::size_t>(rng.uniform_int(i))]);
      else pts.push_back(uniform_point(space, rng));
    }
    const Eigen::MatrixXd g = gram_matrix(pts, p, 0.0);
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    const double ratio = min_eig / g.trace();
    worst = std::min(worst, ratio);
    bad += ratio < -1e-6;
  }
  report(3, bad == 0, fmt("1000 Gram matrices: %.0f below -1e-6 trace; min eigenvalue / trace %.2e", bad, worst),
         seconds_since(t0));
}

// 4. Analytic LML gradient against central finite differences.
void criterion_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  Stream rng(104);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const CategorySpace space = ref::random_space(rng);
    const auto d = ref::random_dataset(space, 5 + rng.uniform_int(26), rng);
    KernelParams p = ref::random_params(space.cont_dim(), rng);
    p.noise_variance = std::max(p.noise_variance, 1e-4);
    p.lambda = std::clamp(p.lambda, 0.05, 0.95);
    const HyperLayout layout(space.cont_dim(), true, true);
    const Eigen::VectorXd g = lml_gradient(d, p);
    const Eigen::VectorXd fd = ref::fd_gradient(d, p, layout);
    for (Eigen::Index i = 0; i < g.size(); ++i) worst = std::max(worst, ref::rel_err(g[i], fd[i], 1e-2));
  }
  report(4, worst <= 1e-4, fmt("100 draws: worst rel err %.2e (tol 1e-4, scale floor 1e-2)", worst), seconds_since(t0));
}

ExperimentConfig func2c_config(const fs::path& out, std::vector<std::string> strategies, bool oracle) {
  ExperimentConfig c;
  c.objective = ObjectiveSpec::builtin("func2c");
  for (const auto& s : strategies) c.strategies.push_back(named_strategy(s));
  c.trials = 10;
  c.iterations = 100;
  c.init_budget = 24;
  c.seed = 0;
  c.oracle = oracle;
  c.out_dir = out;
  return c;
}

ExperimentResult run_fresh(const ExperimentConfig& c) {
  fs::remove_all(c.out_dir);
  return run_experiment(c, nullptr);
}

double mean_at(const std::vector<Trace>& trs, int t) {
  double s = 0.0;
  for (const auto& tr : trs) s += tr.best_at(t);
  return s / static_cast<double>(trs.size());
}

// 5-7 share one run; 9 repeats it.
ExperimentConfig criteria_fig1(const fs::path& work) {
  auto t0 = std::chrono::steady_clock::now();
  const auto cfg = func2c_config(work / "fig1_a", {"vpbo", "random"}, true);
  const auto res = run_fresh(cfg);
  const double run_s = seconds_since(t0);
  if (res.exit_code() != 0 || res.traces.at("vpbo").size() != 10 || res.traces.at("random").size() != 10 ||
      res.oracle.size() != 10) {
    for (const auto& f : res.failures) std::printf("  trial failure: %s %d: %s\n", f.strategy.c_str(), f.trial, f.message.c_str());
    for (int id : {5, 6, 7}) report(id, false, "experiment run had failed trials", run_s);
  } else {
    const auto& v = res.traces.at("vpbo");
    const auto& r = res.traces.at("random");
    int wins = 0, ties = 0;
    for (int j = 0; j < 10; ++j) {
      wins += v[j].best_at(100) > r[j].best_at(100);
      ties += v[j].best_at(100) == r[j].best_at(100);
    }
    const double mv = mean_at(v, 100), mr = mean_at(r, 100), init = mean_at(v, 0);
    double mo = 0.0;
    for (const auto& o : res.oracle) mo += o.best_at(100) / 10.0;
    const double closure = (mv - init) / (mo - init);
    const bool a = mv >= mr && wins >= 7, b = closure >= 0.8;
    report(5, a && b,
           fmt("(a) mean best t=100 VPBO %.4f vs RandomBO %.4f, strict wins %.0f/10", mv, mr, wins) +
               fmt(" (ties %.0f); (b) gap closure %.3f (init %.4f, oracle %.4f)", ties, closure, init, mo),
           run_s);

    t0 = std::chrono::steady_clock::now();
    double reg25 = 0.0, reg100 = 0.0;
    for (const auto& tr : v) {
      reg25 += (kFunc2cOptimum - tr.best_at(25)) / 10.0;
      reg100 += (kFunc2cOptimum - tr.best_at(100)) / 10.0;
    }
    report(6, reg100 < reg25, fmt("mean simple regret t=25 %.4f, t=100 %.4f", reg25, reg100), seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    const auto ranking = oracle_ranking(res.oracle);
    const double freq = arm_pull_frequency(v, ranking, 5, 25, 100);
    std::string top = "top-5 by oracle:";
    for (int i = 0; i < 5; ++i) top += " " + std::to_string(ranking[static_cast<std::size_t>(i)]);
    report(7, freq - 1.0 / 3.0 >= 0.1, fmt("VPBO top-5 pull frequency t=25..100 %.4f (need >= %.4f); ", freq, 1.0 / 3.0 + 0.1) + top,
           seconds_since(t0));
  }

  return cfg;
}

void criterion_determinism(const ExperimentConfig& cfg, const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg2 = cfg;
  cfg2.out_dir = work / "fig1_b";
  const auto res2 = run_fresh(cfg2);
  const std::string diff = ref::compare_trace_dirs(cfg.out_dir, cfg2.out_dir);
  const std::size_t n_files = ref::files_with_prefix(cfg.out_dir, "trace_").size();
  report(9, res2.exit_code() == 0 && diff.empty(),
         diff.empty() ? fmt("%.0f trace CSVs (and initial designs) byte-identical across two runs", n_files) : diff,
         seconds_since(t0));
}

// 8. Search initialisation ablation.
void criterion_search_init(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = func2c_config(work / "ablation", {"vpbo", "vpbo-s"}, false);
  const auto res = run_fresh(cfg);
  const auto& v = res.traces.at("vpbo");
  const auto& s = res.traces.at("vpbo-s");
  if (res.exit_code() != 0 || v.size() != 10 || s.size() != 10) {
    report(8, false, "experiment run had failed trials", seconds_since(t0));
    return;
  }
  int wins = 0;
  for (int j = 0; j < 10; ++j) wins += s[j].best_at(25) >= v[j].best_at(25);
  const bool files = fs::exists(cfg.out_dir / "summary_vpbo.csv") && fs::exists(cfg.out_dir / "summary_vpbo-s.csv");
  report(8, wins >= 6 && files,
         fmt("VPBO-S >= VPBO at t=25 in %.0f/10 paired seeds; mean t=25 VPBO-S %.4f, VPBO %.4f", wins, mean_at(s, 25),
             mean_at(v, 25)) +
             (files ? "; paired summaries written" : "; summary CSVs missing"),
         seconds_since(t0));
}

// 10. External objective protocol.
void criterion_external(const std::string& fixture) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string problems;
  const MixedPoint z{{1, 2}, Eigen::Vector2d(0.25, 0.5)};
  try {
    ExternalObjective ok({fixture, "sum"}, 10.0);
    for (int i = 0; i < 3; ++i)
      if (ok.evaluate(z) != 3.75) problems += " round-trip value wrong;";
  } catch (const std::exception& e) {
    problems += std::string(" round trip threw: ") + e.what() + ";";
  }
  try {
    ExternalObjective slow({fixture, "sleep", "30"}, 0.5);
    const auto s0 = std::chrono::steady_clock::now();
    try {
      slow.evaluate(z);
      problems += " timeout not raised;";
    } catch (const EvaluationError& e) {
      if (std::string(e.what()).find("timed out") == std::string::npos) problems += " timeout message wrong;";
      if (seconds_since(s0) > 5.0) problems += " timeout took too long;";
    }
  } catch (const std::exception& e) {
    problems += std::string(" timeout setup threw: ") + e.what() + ";";
  }
  for (const char* mode : {"malformed", "noy"}) {
    try {
      ExternalObjective bad({fixture, mode}, 10.0);
      bad.evaluate(z);
      problems += std::string(" ") + mode + " accepted;";
    } catch (const ProtocolError&) {
    } catch (const std::exception& e) {
      problems += std::string(" ") + mode + " raised the wrong error: " + e.what() + ";";
    }
  }
  report(10, problems.empty(), problems.empty() ? "round trip, timeout and malformed responses handled" : problems,
         seconds_since(t0));
}

} // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <echo_objective> [work_dir]\n", argv[0]);
    return 2;
  }
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / ("vpbo_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  criterion_ei();
  criterion_gp();
  criterion_psd();
  criterion_gradient();
  const ExperimentConfig fig1 = criteria_fig1(work);
  criterion_search_init(work);
  criterion_determinism(fig1, work);
  criterion_external(argv[1]);
  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
