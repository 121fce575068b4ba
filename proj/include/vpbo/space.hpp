#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vpbo/errors.hpp"
#include "vpbo/random.hpp"

namespace vpbo {

inline constexpr std::size_t kDefaultComboCap = 1024;

/// Discrete sub-space (k categorical variables with N_j choices each) plus
/// the dimension of the continuous unit hypercube.
class CategorySpace {
public:
  CategorySpace() = default;

  CategorySpace(std::vector<int> cardinalities, int cont_dim)
      : cardinalities_(std::move(cardinalities)), cont_dim_(cont_dim) {
    for (int n : cardinalities_)
      if (n < 1) throw DimensionError("category cardinality must be >= 1, got " + std::to_string(n));
    if (cont_dim_ < 1) throw DimensionError("continuous dimension must be >= 1");
  }

  const std::vector<int>& cardinalities() const { return cardinalities_; }
  int num_categorical() const { return static_cast<int>(cardinalities_.size()); }
  int cont_dim() const { return cont_dim_; }

  /// C = prod N_j (1 for a purely continuous space).
  std::size_t combination_count() const {
    std::size_t c = 1;
    for (int n : cardinalities_) c *= static_cast<std::size_t>(n);
    return c;
  }

  /// Lexicographic index of a category vector; the last variable varies fastest.
  std::size_t combo_index(const std::vector<int>& h) const {
    if (h.size() != cardinalities_.size())
      throw DimensionError("category vector has " + std::to_string(h.size()) + " entries, space has " +
                           std::to_string(cardinalities_.size()));
    std::size_t idx = 0;
    for (std::size_t j = 0; j < h.size(); ++j) {
      if (h[j] < 0 || h[j] >= cardinalities_[j])
        throw DimensionError("category index " + std::to_string(h[j]) + " out of range for variable " +
                             std::to_string(j));
      idx = idx * static_cast<std::size_t>(cardinalities_[j]) + static_cast<std::size_t>(h[j]);
    }
    return idx;
  }

  std::vector<int> combo_vector(std::size_t index) const {
    if (index >= combination_count()) throw DimensionError("combination index out of range");
    std::vector<int> h(cardinalities_.size());
    for (std::size_t j = cardinalities_.size(); j-- > 0;) {
      const auto n = static_cast<std::size_t>(cardinalities_[j]);
      h[j] = static_cast<int>(index % n);
      index /= n;
    }
    return h;
  }

  bool operator==(const CategorySpace&) const = default;

private:
  std::vector<int> cardinalities_;
  int cont_dim_ = 1;
};

/// One candidate z = [h, x]: category indices plus a point of [0,1]^d.
struct MixedPoint {
  std::vector<int> h;
  Eigen::VectorXd x;

  bool operator==(const MixedPoint& o) const {
    return h == o.h && x.size() == o.x.size() && x == o.x;
  }
};

inline bool conforms(const MixedPoint& z, const CategorySpace& space) {
  if (static_cast<int>(z.h.size()) != space.num_categorical() || z.x.size() != space.cont_dim()) return false;
  for (std::size_t j = 0; j < z.h.size(); ++j)
    if (z.h[j] < 0 || z.h[j] >= space.cardinalities()[j]) return false;
  for (Eigen::Index i = 0; i < z.x.size(); ++i)
    if (!(z.x[i] >= 0.0 && z.x[i] <= 1.0)) return false;
  return true;
}

inline void require_conforms(const MixedPoint& z, const CategorySpace& space) {
  if (!conforms(z, space)) throw DimensionError("point does not conform to the category space");
}

/// All C category vectors in lexicographic order.
inline std::vector<std::vector<int>> enumerate_combinations(const CategorySpace& space,
                                                            std::size_t cap = kDefaultComboCap) {
  const std::size_t c = space.combination_count();
  if (c > cap)
    throw CapacityError("space has " + std::to_string(c) + " categorical combinations, above the cap of " +
                        std::to_string(cap) + "; raise it with --combo-cap");
  std::vector<std::vector<int>> out;
  out.reserve(c);
  for (std::size_t i = 0; i < c; ++i) out.push_back(space.combo_vector(i));
  return out;
}

inline Eigen::VectorXd uniform_unit_vector(int dim, Stream& rng) {
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x[i] = rng.uniform();
  return x;
}

inline std::vector<int> uniform_categories(const CategorySpace& space, Stream& rng) {
  std::vector<int> h(space.cardinalities().size());
  for (std::size_t j = 0; j < h.size(); ++j) h[j] = rng.uniform_int(space.cardinalities()[j]);
  return h;
}

inline MixedPoint uniform_point(const CategorySpace& space, Stream& rng) {
  MixedPoint z;
  z.h = uniform_categories(space, rng);
  z.x = uniform_unit_vector(space.cont_dim(), rng);
  return z;
}

} // namespace vpbo
