// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "tuma/config.hpp"

namespace tuma {

/// Multiplicity prior p(k), k = 0..K_max, shared by every codeword of a zone.
struct PriorTable {
  std::vector<double> pmf;
  std::vector<double> log_pmf;

  [[nodiscard]] std::size_t K_max() const { return pmf.size() - 1; }
  [[nodiscard]] double p0() const { return pmf.front(); }
};

inline double log_binomial_pmf(std::size_t k, std::size_t n, double p) {
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  return std::lgamma(nd + 1) - std::lgamma(kd + 1) - std::lgamma(nd - kd + 1) + kd * std::log(p) +
         (nd - kd) * std::log1p(-p);
}

/// p(0) = p0 = 1 - M_a/M; p(k) for 1 <= k <= K_max is (1 - p0) times the
/// Bin(K_u, 1/M_a) pmf renormalized over 1..K_max. With K_max = K_u this is
/// the zero-truncated binomial; with K_max < K_u the tail mass moves onto the
/// kept multiplicities so p(0) stays exactly p0.
inline PriorTable build_prior(std::size_t M, std::size_t K_u, std::size_t M_a_u, std::size_t K_max) {
  if (M_a_u > M || M_a_u == 0) throw ConfigError("build_prior: need 1 <= M_a_u <= M");
  if (K_max == 0 || K_max > K_u) throw ConfigError("build_prior: need 1 <= K_max <= K_u");
  const double p0 = 1.0 - static_cast<double>(M_a_u) / static_cast<double>(M);
  const double q = 1.0 / static_cast<double>(M_a_u);

  std::vector<double> bin(K_max + 1, 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k <= K_max; ++k) {
    // q == 1 puts all mass on k = K_u
    bin[k] = q >= 1.0 ? (k == K_u ? 1.0 : 0.0) : std::exp(log_binomial_pmf(k, K_u, q));
    total += bin[k];
  }
  if (!(total > 0.0)) throw ConfigError("build_prior: truncated binomial has no mass on 1..K_max");

  PriorTable t;
  t.pmf.resize(K_max + 1);
  t.log_pmf.resize(K_max + 1);
  t.pmf[0] = p0;
  for (std::size_t k = 1; k <= K_max; ++k) t.pmf[k] = (1.0 - p0) * bin[k] / total;
  for (std::size_t k = 0; k <= K_max; ++k)
    t.log_pmf[k] = t.pmf[k] > 0.0 ? std::log(t.pmf[k]) : -std::numeric_limits<double>::infinity();
  return t;
}

inline PriorTable build_prior(const SystemConfig& cfg) { return build_prior(cfg.M, cfg.K_u, cfg.M_a_u, cfg.K_max); }

}  // namespace tuma
