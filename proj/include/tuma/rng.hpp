// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace tuma {

using Rng = std::mt19937_64;
using cdouble = std::complex<double>;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Pure function of its arguments; used to give every trial (and every
/// sub-stream of a trial) an independent generator.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

/// Proper complex Gaussian CN(0, variance): real and imaginary parts are
/// independent N(0, variance/2).
class ComplexNormal {
 public:
  explicit ComplexNormal(double variance = 1.0) : normal_(0.0, std::sqrt(variance / 2.0)) {}
  cdouble operator()(Rng& rng) {
    const double re = normal_(rng);
    const double im = normal_(rng);
    return {re, im};
  }

 private:
  std::normal_distribution<double> normal_;
};

// Named sub-streams of one trial.
enum class Stream : std::uint64_t { scenario = 1, codebook, fading, noise, samples, phases };

inline Rng make_stream(std::uint64_t trial_seed, Stream s) {
  return Rng(derive_seed(trial_seed, {static_cast<std::uint64_t>(s)}));
}

}  // namespace tuma
