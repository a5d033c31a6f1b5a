#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "uzawa/sparse.hpp"

namespace uzawa {

/// splitmix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Portable seeded generator.
///
/// Raw bits come from std::mt19937_64 (fully specified by the standard) seeded
/// with splitmix64(seed). Uniforms take the top 53 bits; normals use the
/// Marsaglia polar method. Independent streams for one seed are derived with
/// `Rng(seed, tag)`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t tag)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename Scalar>
VectorX<Scalar> random_normal(Rng& rng, Index n) {
  VectorX<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v[i] = Scalar(rng.normal());
  return v;
}

template <typename Scalar>
VectorX<Scalar> random_uniform(Rng& rng, Index n) {
  VectorX<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v[i] = Scalar(rng.uniform());
  return v;
}

/// Uniformly distributed direction on the unit sphere.
template <typename Scalar>
VectorX<Scalar> random_unit(Rng& rng, Index n) {
  VectorX<Scalar> v = random_normal<Scalar>(rng, n);
  return v / v.norm();
}

}  // namespace uzawa
