#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "tuma/config.hpp"
#include "tuma/model.hpp"
#include "tuma/rng.hpp"

using namespace tuma;

namespace {

SystemConfig grid(std::size_t g) {
  SystemConfig c;
  c.grid_dim = g;
  return c;
}

}  // namespace

TEST(Topology, ThreeByThreeHasFortyAps) {
  const Topology t = build_grid_topology(grid(3));
  EXPECT_EQ(t.U(), 9u);
  EXPECT_EQ(t.B(), 40u);
  EXPECT_EQ(t.F(), 160u);
}

TEST(Topology, DegenerateAndTwoByTwoCounts) {
  EXPECT_EQ(build_grid_topology(grid(1)).B(), 8u);
  EXPECT_EQ(build_grid_topology(grid(1)).U(), 1u);
  EXPECT_EQ(build_grid_topology(grid(2)).B(), 21u);
  EXPECT_EQ(build_grid_topology(grid(2)).U(), 4u);
}

TEST(Topology, ApsInsideCoverageAndDistinct) {
  const Topology t = build_grid_topology(grid(3));
  std::set<std::pair<double, double>> seen;
  for (const auto& p : t.aps) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, t.extent());
    EXPECT_GE(p.y, 0.0);
    EXPECT_LE(p.y, t.extent());
    seen.insert({p.x, p.y});
  }
  EXPECT_EQ(seen.size(), t.B());
}

TEST(Topology, ApSetInvariantUnderSquareSymmetries) {
  const Topology t = build_grid_topology(grid(3));
  const double L = t.extent();
  std::set<std::pair<double, double>> aps;
  for (const auto& p : t.aps) aps.insert({p.x, p.y});
  const std::vector<std::function<Point(Point)>> maps = {
      [&](Point p) { return Point{L - p.y, p.x}; },      [&](Point p) { return Point{L - p.x, L - p.y}; },
      [&](Point p) { return Point{p.y, L - p.x}; },      [&](Point p) { return Point{L - p.x, p.y}; },
      [&](Point p) { return Point{p.x, L - p.y}; },      [&](Point p) { return Point{p.y, p.x}; },
      [&](Point p) { return Point{L - p.y, L - p.x}; }};
  for (const auto& f : maps) {
    std::set<std::pair<double, double>> img;
    for (const auto& p : t.aps) {
      const Point q = f(p);
      img.insert({q.x, q.y});
    }
    EXPECT_EQ(img, aps);
  }
}

TEST(Topology, ZonesTileCoverage) {
  const Topology t = build_grid_topology(grid(3));
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, t.extent());
  for (int i = 0; i < 20000; ++i) {
    const Point p{u(rng), u(rng)};
    std::size_t hits = 0;
    for (const auto& z : t.zones)
      hits += (p.x >= z.origin.x && p.x < z.origin.x + z.side && p.y >= z.origin.y && p.y < z.origin.y + z.side) ? 1 : 0;
    ASSERT_EQ(hits, 1u);
    const auto z = t.zone_of(p);
    ASSERT_TRUE(z.has_value());
    const Zone& zz = t.zones[*z];
    EXPECT_TRUE(p.x >= zz.origin.x && p.x < zz.origin.x + zz.side);
  }
  EXPECT_EQ(t.zone_of({t.extent(), t.extent()}), std::optional<std::size_t>(8));
  EXPECT_FALSE(t.zone_of({-1.0, 5.0}).has_value());
}

TEST(Lsfc, ReferenceValues) {
  const Point ap{0, 0};
  EXPECT_DOUBLE_EQ(lsfc(ap, ap, 13.57, 3.67), 1.0);
  EXPECT_NEAR(lsfc({13.57, 0}, ap, 13.57, 3.67), 0.5, 1e-15);
  EXPECT_NEAR(lsfc({2 * 13.57, 0}, ap, 13.57, 3.67), 1.0 / (1.0 + std::pow(2.0, 3.67)), 1e-15);
  EXPECT_NEAR(lsfc({2 * 13.57, 0}, ap, 13.57, 3.67), 0.07284, 5e-6);
}

TEST(Lsfc, StrictlyDecreasingAndBounded) {
  Rng rng(5);
  std::uniform_real_distribution<double> d(0.0, 400.0);
  for (int i = 0; i < 10000; ++i) {
    double a = d(rng), b = d(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    const double ga = lsfc({a, 0}, {0, 0}, 13.57, 3.67), gb = lsfc({0, b}, {0, 0}, 13.57, 3.67);
    EXPECT_GT(ga, gb);
    EXPECT_GT(gb, 0.0);
    EXPECT_LE(ga, 1.0);
  }
}

TEST(Lsfc, ProfileMatchesScalar) {
  const SystemConfig cfg = grid(2);
  const Topology t = build_grid_topology(cfg);
  const LsfcProfile p(t, cfg);
  const Point rho{37.0, 121.5};
  const Eigen::VectorXd g = p(rho);
  ASSERT_EQ(static_cast<std::size_t>(g.size()), t.B());
  for (std::size_t b = 0; b < t.B(); ++b) EXPECT_DOUBLE_EQ(g[static_cast<Eigen::Index>(b)], lsfc(rho, t.aps[b], cfg));
}

TEST(NoiseVariance, CentroidDistanceIsFiftyMeters) {
  const SystemConfig cfg = grid(3);
  const Topology t = build_grid_topology(cfg);
  for (std::size_t u = 0; u < t.U(); ++u) EXPECT_NEAR(centroid_to_nearest_ap(t, u), 50.0, 1e-12);
  const double snr_tx = std::pow(10.0, -3.0) * (1.0 + std::pow(50.0 / 13.57, 3.67));
  EXPECT_NEAR(noise_variance(cfg, t), (1.0 / 1024.0) / snr_tx, 1e-18);
}

TEST(NoiseVariance, NoiselessLimit) {
  SystemConfig cfg = grid(3);
  const Topology t = build_grid_topology(cfg);
  cfg.snr_rx_db = 300.0;
  EXPECT_LT(noise_variance(cfg, t), 1e-30);
  cfg.snr_rx_db = std::numeric_limits<double>::infinity();
  EXPECT_EQ(noise_variance(cfg, t), 0.0);
}

TEST(NoiseVariance, RejectsNonCongruentZones) {
  const SystemConfig cfg = grid(2);
  Topology t = with_aps(build_grid_topology(cfg), {{0.0, 0.0}});
  EXPECT_THROW(noise_variance(cfg, t), ConfigError);
}

TEST(NoiseVariance, RejectsNonPositiveSnr) {
  SystemConfig cfg = grid(1);
  cfg.snr_rx_db = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(noise_variance(cfg, build_grid_topology(grid(1))), ConfigError);
}

TEST(Topology, ExplicitApsMustBeInside) {
  const Topology t = build_grid_topology(grid(1));
  EXPECT_THROW(with_aps(t, {{150.0, 0.0}}), ConfigError);
  EXPECT_THROW(with_aps(t, {}), ConfigError);
  EXPECT_EQ(with_aps(t, {{50.0, 50.0}}).B(), 1u);
}

TEST(Config, DefaultsValidate) {
  EXPECT_NO_THROW(SystemConfig{}.validate());
  EXPECT_NO_THROW(reduced_config().validate());
}

TEST(Config, RejectsInvalid) {
  SystemConfig c;
  c.M_a_u = 21;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.K_max = 21;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.zone_side = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.N_s = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.snr_rx_db = std::nan("");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ParseAndRoundTrip) {
  std::istringstream in("# comment\n grid_dim = 2 \nN=512\n\nsnr_rx_db = -20 # trailing\nK_max = 8\n");
  const SystemConfig c = parse_config(in);
  EXPECT_EQ(c.grid_dim, 2u);
  EXPECT_EQ(c.N, 512u);
  EXPECT_EQ(c.snr_rx_db, -20.0);
  EXPECT_EQ(c.K_max, 8u);
  EXPECT_EQ(c.A, 4u);

  std::istringstream again(to_config_text(c));
  const SystemConfig d = parse_config(again);
  EXPECT_EQ(to_config_text(c), to_config_text(d));
}

TEST(Config, ParseErrors) {
  std::istringstream unknown("bogus = 1\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream bad_number("N = 12x\n");
  EXPECT_THROW(parse_config(bad_number), ConfigError);
  std::istringstream no_eq("N 12\n");
  EXPECT_THROW(parse_config(no_eq), ConfigError);
  std::istringstream invalid("K_u = 5\n");  // M_a_u = 13 > K_u
  EXPECT_THROW(parse_config(invalid), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST(Rng, DeriveSeedIsPureAndSpreads) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
  EXPECT_NE(derive_seed(1, {}), derive_seed(1, {0}));
  static_assert(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
}

TEST(Rng, ComplexNormalIsProper) {
  Rng rng(3);
  ComplexNormal cn(2.0);
  double re2 = 0, im2 = 0, reim = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const cdouble z = cn(rng);
    re2 += z.real() * z.real();
    im2 += z.imag() * z.imag();
    reim += z.real() * z.imag();
  }
  EXPECT_NEAR(re2 / n, 1.0, 0.02);
  EXPECT_NEAR(im2 / n, 1.0, 0.02);
  EXPECT_NEAR(reim / n, 0.0, 0.02);
}
