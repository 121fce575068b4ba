#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string_view>

namespace vpbo {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace detail

/// Derives a child seed from a parent seed, a stable label and any number
/// of integer indices. Streams for different labels/indices are independent,
/// so the order in which work is scheduled never changes the numbers drawn.
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = detail::splitmix64(parent ^ detail::fnv1a(label));
  for (std::uint64_t i : indices) h = detail::splitmix64(h ^ detail::splitmix64(i + 0x632be59bd9b4e019ULL));
  return h;
}

/// Seeded random stream. All draws are built from raw 64-bit engine output
/// so sequences are identical across standard library implementations.
class Stream {
public:
  explicit Stream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Stream child(std::string_view label, std::initializer_list<std::uint64_t> indices = {}) const {
    return Stream(derive_seed(seed_, label, indices));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  int uniform_int(int n) {
    auto v = static_cast<int>(uniform() * n);
    return v >= n ? n - 1 : v;
  }

  /// Standard normal by Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace vpbo
