#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "vpbo/errors.hpp"
#include "vpbo/space.hpp"

namespace vpbo {

/// Black-box objective: maps a conforming point to a value to be maximised.
using ObjectiveFn = std::function<double(const MixedPoint&)>;

namespace bench {

inline void require_box(const Eigen::Vector2d& x, double lo0, double hi0, double lo1, double hi1, const char* name) {
  if (!(x[0] >= lo0 && x[0] <= hi0 && x[1] >= lo1 && x[1] <= hi1))
    throw DomainError(std::string(name) + ": input (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) +
                      ") outside its domain");
}

inline double beale(const Eigen::Vector2d& x) {
  require_box(x, -4.5, 4.5, -4.5, 4.5, "beale");
  const double a = x[0], b = x[1];
  const double t1 = 1.5 - a + a * b;
  const double t2 = 2.25 - a + a * b * b;
  const double t3 = 2.625 - a + a * b * b * b;
  return t1 * t1 + t2 * t2 + t3 * t3;
}

inline double six_hump_camel(const Eigen::Vector2d& x) {
  require_box(x, -3.0, 3.0, -2.0, 2.0, "six_hump_camel");
  const double a = x[0], b = x[1];
  return (4.0 - 2.1 * a * a + a * a * a * a / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b;
}

inline double rosenbrock2(const Eigen::Vector2d& x) {
  require_box(x, -2.0, 2.0, -2.0, 2.0, "rosenbrock2");
  const double a = x[0], b = x[1];
  return 100.0 * (b - a * a) * (b - a * a) + (1.0 - a) * (1.0 - a);
}

enum class Base { Rosenbrock, Camel, Beale };

inline double evaluate_base(Base f, const Eigen::Vector2d& x) {
  switch (f) {
    case Base::Rosenbrock: return rosenbrock2(x);
    case Base::Camel: return six_hump_camel(x);
    case Base::Beale: return beale(x);
  }
  return 0.0;
}

struct WeightedTerm {
  double weight;
  Base fn;
};

/// One categorical variable's choices: choice i contributes weight_i * fn_i(x).
using TermTable = std::vector<WeightedTerm>;

/// Linear-combination tables for the Func2C/Func3C family. Overridable.
struct SyntheticTables {
  TermTable first{{1.0, Base::Rosenbrock}, {1.0, Base::Camel}, {1.0, Base::Beale}};
  TermTable second{{1.0, Base::Rosenbrock}, {1.0, Base::Camel}, {1.0, Base::Beale},
                   {2.0, Base::Rosenbrock}, {2.0, Base::Camel}};
  TermTable third{{3.0, Base::Camel}, {2.0, Base::Rosenbrock}, {1.0, Base::Beale}, {1.5, Base::Camel}};
};

/// [0,1]^2 -> [-1,1]^2.
inline Eigen::Vector2d to_native(const Eigen::VectorXd& x_unit) {
  if (x_unit.size() != 2) throw DimensionError("synthetic benchmarks take a 2-D continuous input");
  for (int i = 0; i < 2; ++i)
    if (!(x_unit[i] >= 0.0 && x_unit[i] <= 1.0)) throw DomainError("continuous input outside the unit square");
  return Eigen::Vector2d(2.0 * x_unit[0] - 1.0, 2.0 * x_unit[1] - 1.0);
}

inline double term(const TermTable& table, int h, const Eigen::Vector2d& x, const char* var) {
  if (h < 0 || h >= static_cast<int>(table.size()))
    throw DomainError(std::string("category index out of range for ") + var);
  const auto& t = table[static_cast<std::size_t>(h)];
  return t.weight * evaluate_base(t.fn, x);
}

inline double func2c(const std::vector<int>& h, const Eigen::VectorXd& x_unit, const SyntheticTables& tables = {}) {
  if (h.size() != 2) throw DimensionError("func2c takes two categorical variables");
  const Eigen::Vector2d x = to_native(x_unit);
  return -(term(tables.first, h[0], x, "h1") + term(tables.second, h[1], x, "h2"));
}

inline double func3c(const std::vector<int>& h, const Eigen::VectorXd& x_unit, const SyntheticTables& tables = {}) {
  if (h.size() != 3) throw DimensionError("func3c takes three categorical variables");
  const Eigen::Vector2d x = to_native(x_unit);
  return -(term(tables.first, h[0], x, "h1") + term(tables.second, h[1], x, "h2") +
           term(tables.third, h[2], x, "h3"));
}

inline CategorySpace func2c_space(const SyntheticTables& t = {}) {
  return CategorySpace({static_cast<int>(t.first.size()), static_cast<int>(t.second.size())}, 2);
}

inline CategorySpace func3c_space(const SyntheticTables& t = {}) {
  return CategorySpace(
      {static_cast<int>(t.first.size()), static_cast<int>(t.second.size()), static_cast<int>(t.third.size())}, 2);
}

// ---------------------------------------------------------------------------
// Reference optima by brute force.

struct ArmOptimum {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd x;
};

/// Compass search on the unit box, maximising; never returns a worse point.
inline ArmOptimum polish(const std::function<double(const Eigen::VectorXd&)>& f, ArmOptimum start,
                         double initial_step, double min_step = 1e-12) {
  double step = initial_step;
  while (step > min_step) {
    bool moved = false;
    for (Eigen::Index d = 0; d < start.x.size(); ++d) {
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd cand = start.x;
        cand[d] = std::clamp(cand[d] + sign * step, 0.0, 1.0);
        const double v = f(cand);
        if (v > start.value) {
          start.value = v;
          start.x = cand;
          moved = true;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return start;
}

/// Maximum of a 2-D function of the unit square: regular grid of
/// `per_side`^2 points (endpoints included), then compass polish from the
/// best grid point.
inline ArmOptimum grid_maximum(const std::function<double(const Eigen::VectorXd&)>& f, int per_side = 1000) {
  ArmOptimum best;
  Eigen::VectorXd x(2);
  for (int i = 0; i < per_side; ++i) {
    x[0] = static_cast<double>(i) / (per_side - 1);
    for (int j = 0; j < per_side; ++j) {
      x[1] = static_cast<double>(j) / (per_side - 1);
      const double v = f(x);
      if (v > best.value) {
        best.value = v;
        best.x = x;
      }
    }
  }
  return polish(f, best, 1.0 / (per_side - 1));
}

/// Per-combination maxima of a 2-D mixed objective, indexed by combination.
inline std::vector<ArmOptimum> reference_optima(const CategorySpace& space, const ObjectiveFn& f, int per_side = 1000) {
  if (space.cont_dim() != 2) throw DimensionError("grid reference optima are implemented for d_x = 2");
  std::vector<ArmOptimum> out;
  for (const auto& h : enumerate_combinations(space)) {
    out.push_back(grid_maximum([&](const Eigen::VectorXd& x) { return f(MixedPoint{h, x}); }, per_side));
  }
  return out;
}

} // namespace bench

/// Description of an objective for the harness.
struct ObjectiveSpec {
  enum class Kind { Builtin, External };

  std::string name = "func2c";
  Kind kind = Kind::Builtin;
  CategorySpace space = bench::func2c_space();
  std::vector<std::string> command; // external: argv
  double timeout_s = 600.0;
  double noise_std = 0.0;
  bench::SyntheticTables tables;

  static ObjectiveSpec builtin(const std::string& name, double noise_std = 0.0) {
    ObjectiveSpec s;
    s.name = name;
    s.noise_std = noise_std;
    if (name == "func2c") s.space = bench::func2c_space(s.tables);
    else if (name == "func3c") s.space = bench::func3c_space(s.tables);
    else throw ConfigError("unknown builtin objective '" + name + "' (expected func2c or func3c)");
    return s;
  }

  void validate() const {
    if (kind == Kind::Builtin && name != "func2c" && name != "func3c")
      throw ConfigError("unknown builtin objective '" + name + "'");
    if (kind == Kind::External && command.empty()) throw ConfigError("external objective needs a command");
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  }
};

/// Deterministic (noise-free) builtin objective.
inline ObjectiveFn builtin_objective(const ObjectiveSpec& spec) {
  if (spec.name == "func2c") return [t = spec.tables](const MixedPoint& z) { return bench::func2c(z.h, z.x, t); };
  if (spec.name == "func3c") return [t = spec.tables](const MixedPoint& z) { return bench::func3c(z.h, z.x, t); };
  throw ConfigError("unknown builtin objective '" + spec.name + "'");
}

} // namespace vpbo
