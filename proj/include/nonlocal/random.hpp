#pragma once

#include <cmath>
#include <cstdint>

#include "nonlocal/grid.hpp"
#include "nonlocal/kernel.hpp"

namespace nonlocal {

/// Counter-based generator: the k-th draw of stream s under seed is a pure
/// function of (seed, s, k), so ensemble members can be evolved in any order
/// or on any thread without changing their inputs.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  /// Independent child stream; splitting is itself deterministic.
  CounterRng split(std::uint64_t child) const { return CounterRng(key_, child); }

  std::uint64_t next() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Node values uniform in [-amplitude, amplitude].
template <typename Scalar>
StateField<Scalar> uniform_field(const GridPtr<Scalar>& grid, CounterRng& rng, Scalar amplitude) {
  VectorX<Scalar> v(grid->size());
  for (Index k = 0; k < v.size(); ++k) v[k] = amplitude * Scalar(rng.uniform(-1.0, 1.0));
  return StateField<Scalar>(grid, std::move(v));
}

/// Uniform noise with amplitude radius / |Omega|^(1/p), hence ||u||_p <= radius.
template <typename Scalar>
StateField<Scalar> random_field_in_ball(const GridPtr<Scalar>& grid, CounterRng& rng, Scalar radius,
                                        const LpSpace<Scalar>& space) {
  const Scalar amplitude = radius / std::pow(grid->measure(), Scalar(1) / space.p());
  return uniform_field(grid, rng, amplitude);
}

/// Uniform noise rescaled to ||u||_p == norm exactly (up to rounding).
template <typename Scalar>
StateField<Scalar> random_field_with_norm(const GridPtr<Scalar>& grid, CounterRng& rng, Scalar norm,
                                          const LpSpace<Scalar>& space) {
  auto u = uniform_field(grid, rng, Scalar(1));
  const Scalar n = lp_norm(u, space);
  if (n == Scalar(0)) return u;
  return (norm / n) * u;
}

/// Noise mollified by a kernel, rescaled to ||u||_p == norm.
template <typename Scalar>
StateField<Scalar> smooth_random_field(const KernelMatrix<Scalar>& mollifier, CounterRng& rng,
                                       Scalar norm, const LpSpace<Scalar>& space) {
  const auto noise = uniform_field(mollifier.grid_ptr(), rng, Scalar(1));
  auto u = apply(mollifier, noise);
  const Scalar n = lp_norm(u, space);
  if (n == Scalar(0)) return u;
  return (norm / n) * u;
}

}  // namespace nonlocal
