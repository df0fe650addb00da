// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <vector>

#include "tuma/config.hpp"
#include "tuma/model.hpp"
#include "tuma/rng.hpp"
#include "tuma/source.hpp"

namespace tuma {

/// Monte Carlo position samples for one zone.
///
/// Sample i is an ordered K_max-tuple of i.i.d. uniform positions; the k-user
/// hypothesis uses its first k entries, so every prefix is itself an i.i.d.
/// uniform k-tuple. `prefix` stores the LSFC totals
///   s(i, b, k) = sum_{j <= k} gamma_b(rho^i_j)
/// as a (K_max * N_s) x B matrix with row (k - 1) * N_s + i.
struct ZoneSamples {
  std::size_t num_samples = 0;
  std::size_t max_mult = 0;
  Eigen::MatrixXd prefix;
  std::vector<Point> positions;  // index i * K_max + j

  [[nodiscard]] Eigen::Index row(std::size_t k, std::size_t i) const {
    return static_cast<Eigen::Index>((k - 1) * num_samples + i);
  }
  [[nodiscard]] std::size_t B() const { return static_cast<std::size_t>(prefix.cols()); }

  /// The same samples seen by a single AP.
  [[nodiscard]] ZoneSamples restricted(std::size_t b) const {
    ZoneSamples z;
    z.num_samples = num_samples;
    z.max_mult = max_mult;
    z.prefix = prefix.col(static_cast<Eigen::Index>(b));
    z.positions = positions;
    return z;
  }
};

inline ZoneSamples draw_zone_samples(const Zone& zone, const LsfcProfile& lsfc, std::size_t num_samples,
                                     std::size_t max_mult, Rng& rng) {
  ZoneSamples z;
  z.num_samples = num_samples;
  z.max_mult = max_mult;
  const auto B = static_cast<Eigen::Index>(lsfc.B());
  z.prefix.resize(static_cast<Eigen::Index>(max_mult * num_samples), B);
  z.positions.reserve(num_samples * max_mult);
  Eigen::VectorXd running(B), g(B);
  for (std::size_t i = 0; i < num_samples; ++i) {
    running.setZero();
    for (std::size_t k = 1; k <= max_mult; ++k) {
      const Point p = uniform_in(zone, rng);
      z.positions.push_back(p);
      lsfc.gains(p, g.data());
      running += g;
      z.prefix.row(z.row(k, i)) = running.transpose();
    }
  }
  return z;
}

/// One bank per trial, shared by all iterations, all codewords, and (in the
/// distributed decoder) all APs.
struct SampleBank {
  std::vector<ZoneSamples> zones;

  static SampleBank draw(const Topology& topo, const LsfcProfile& lsfc, std::size_t num_samples,
                         std::size_t max_mult, Rng& rng) {
    SampleBank bank;
    for (const auto& z : topo.zones) bank.zones.push_back(draw_zone_samples(z, lsfc, num_samples, max_mult, rng));
    return bank;
  }

  static SampleBank draw(const Topology& topo, const SystemConfig& cfg, Rng& rng) {
    return draw(topo, LsfcProfile(topo, cfg), cfg.N_s, cfg.K_max, rng);
  }

  [[nodiscard]] SampleBank restricted(std::size_t b) const {
    SampleBank out;
    for (const auto& z : zones) out.zones.push_back(z.restricted(b));
    return out;
  }
};

}  // namespace tuma
