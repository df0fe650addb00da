// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "tuma/config.hpp"

namespace tuma {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned square zone [x0, x0 + side) x [y0, y0 + side).
struct Zone {
  Point origin;
  double side = 0.0;

  [[nodiscard]] Point centroid() const { return {origin.x + side / 2, origin.y + side / 2}; }
  [[nodiscard]] double area() const { return side * side; }
};

/// Zones of a grid_dim x grid_dim layout (row-major, zone 0 at the origin)
/// and the AP positions. Antenna f belongs to AP f / A.
struct Topology {
  std::vector<Zone> zones;
  std::vector<Point> aps;
  std::size_t A = 1;
  std::size_t grid_dim = 1;
  double zone_side = 1.0;

  [[nodiscard]] std::size_t U() const { return zones.size(); }
  [[nodiscard]] std::size_t B() const { return aps.size(); }
  [[nodiscard]] std::size_t F() const { return A * aps.size(); }
  [[nodiscard]] double extent() const { return zone_side * static_cast<double>(grid_dim); }

  /// Index of the zone containing p. Intervals are half-open except on the
  /// far boundary of the coverage area, so zones tile it exactly.
  [[nodiscard]] std::optional<std::size_t> zone_of(Point p) const {
    const double L = extent();
    if (!(p.x >= 0.0 && p.x <= L && p.y >= 0.0 && p.y <= L)) return std::nullopt;
    auto cell = [&](double v) {
      auto i = static_cast<std::size_t>(std::floor(v / zone_side));
      return std::min(i, grid_dim - 1);
    };
    return cell(p.y) * grid_dim + cell(p.x);
  }

  /// Same layout restricted to a single AP (used by the per-AP local decoder).
  [[nodiscard]] Topology single_ap(std::size_t b) const {
    Topology t = *this;
    t.aps = {aps.at(b)};
    return t;
  }
};

/// Large-scale fading coefficient 1 / (1 + (d/d0)^alpha).
inline double lsfc(Point rho, Point nu_b, double d0, double alpha) {
  return 1.0 / (1.0 + std::pow(distance(rho, nu_b) / d0, alpha));
}

inline double lsfc(Point rho, Point nu_b, const SystemConfig& cfg) { return lsfc(rho, nu_b, cfg.d0, cfg.alpha); }

/// gamma_b(rho) for every AP; the diagonal of Sigma(rho) before the kron with I_A.
class LsfcProfile {
 public:
  LsfcProfile(const Topology& topo, double d0, double alpha) : aps_(topo.aps), d0_(d0), alpha_(alpha) {}
  LsfcProfile(const Topology& topo, const SystemConfig& cfg) : LsfcProfile(topo, cfg.d0, cfg.alpha) {}

  [[nodiscard]] Eigen::VectorXd operator()(Point rho) const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(aps_.size()));
    gains(rho, g.data());
    return g;
  }

  void gains(Point rho, double* out) const {
    for (std::size_t b = 0; b < aps_.size(); ++b) out[b] = lsfc(rho, aps_[b], d0_, alpha_);
  }

  [[nodiscard]] std::size_t B() const { return aps_.size(); }

 private:
  std::vector<Point> aps_;
  double d0_;
  double alpha_;
};

/// Square grid of zones with APs on every grid-line intersection and on every
/// zone-edge midpoint: (g+1)^2 + 2g(g+1) APs, i.e. 40 for the 3x3 layout.
inline Topology build_grid_topology(const SystemConfig& cfg) {
  if (cfg.grid_dim < 1) throw ConfigError("grid_dim must be >= 1");
  Topology t;
  t.A = cfg.A;
  t.grid_dim = cfg.grid_dim;
  t.zone_side = cfg.zone_side;
  const std::size_t g = cfg.grid_dim;
  const double s = cfg.zone_side;
  for (std::size_t r = 0; r < g; ++r)
    for (std::size_t c = 0; c < g; ++c)
      t.zones.push_back(Zone{{static_cast<double>(c) * s, static_cast<double>(r) * s}, s});

  // Lattice at half-zone spacing; keep nodes that are not zone centroids.
  for (std::size_t j = 0; j <= 2 * g; ++j)
    for (std::size_t i = 0; i <= 2 * g; ++i) {
      if (i % 2 == 1 && j % 2 == 1) continue;
      t.aps.push_back({static_cast<double>(i) * s / 2, static_cast<double>(j) * s / 2});
    }
  return t;
}

/// Replaces the lattice APs with an explicit list. Every AP must lie in the coverage area.
inline Topology with_aps(Topology t, std::vector<Point> aps) {
  const double L = t.extent();
  for (const auto& p : aps)
    if (!(p.x >= 0 && p.x <= L && p.y >= 0 && p.y <= L)) throw ConfigError("AP outside the coverage area");
  if (aps.empty()) throw ConfigError("at least one AP is required");
  t.aps = std::move(aps);
  return t;
}

/// Distance from the centroid of `zone` to its closest AP.
inline double centroid_to_nearest_ap(const Topology& topo, std::size_t zone) {
  const Point c = topo.zones.at(zone).centroid();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ap : topo.aps) best = std::min(best, distance(c, ap));
  return best;
}

/// sigma_w^2 = P / SNR_tx with SNR_tx = SNR_rx * (1 + (varsigma/d0)^alpha),
/// varsigma measured from zone 0. Throws if the zones are not congruent w.r.t. their nearest AP.
inline double noise_variance(const SystemConfig& cfg, const Topology& topo) {
  const double snr_rx = std::pow(10.0, cfg.snr_rx_db / 10.0);
  if (!(snr_rx > 0.0)) throw ConfigError("SNR_rx must be positive in linear scale");
  const double varsigma = centroid_to_nearest_ap(topo, 0);
  for (std::size_t u = 1; u < topo.U(); ++u)
    if (std::abs(centroid_to_nearest_ap(topo, u) - varsigma) > 1e-9 * std::max(1.0, varsigma))
      throw ConfigError("zones are not congruent: centroid-to-nearest-AP distance differs from zone 0");
  const double snr_tx = snr_rx * (1.0 + std::pow(varsigma / cfg.d0, cfg.alpha));
  if (std::isinf(snr_tx)) return 0.0;
  return cfg.power() / snr_tx;
}

}  // namespace tuma
