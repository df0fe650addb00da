#include <gtest/gtest.h>

#include <sstream>

#include "tuma/channel.hpp"
#include "tuma/source.hpp"

using namespace tuma;

TEST(Codebook, ColumnEnergyAndCrossCorrelation) {
  Rng rng(1);
  const Codebook cb = generate_codebook(1024, 1, 10000, rng);
  const Eigen::VectorXd energy = cb.C.colwise().squaredNorm().transpose();
  EXPECT_NEAR(energy.mean(), 1.0, 0.05);
  double cross = 0.0, cross_mag = 0.0;
  cdouble cross_mean{0.0, 0.0};
  for (Eigen::Index i = 0; i + 1 < 2000; i += 2) {
    const cdouble ip = cb.C.col(i).dot(cb.C.col(i + 1));
    cross_mean += ip;
    cross_mag += std::norm(ip);
    cross += 1.0;
  }
  EXPECT_LT(std::abs(cross_mean / cross), 0.01);
  EXPECT_NEAR(cross_mag / cross, 1.0 / 1024.0, 0.2 / 1024.0);
}

TEST(Codebook, EntryVarianceScalesWithN) {
  Rng a(2), b(2);
  const double v512 = generate_codebook(512, 2, 256, a).C.cwiseAbs2().mean();
  const double v1024 = generate_codebook(1024, 2, 256, b).C.cwiseAbs2().mean();
  EXPECT_NEAR(v512 / v1024, 2.0, 0.05);
}

TEST(Codebook, ZoneBlocks) {
  Rng rng(3);
  const Codebook cb = generate_codebook(16, 3, 5, rng);
  EXPECT_EQ(cb.C.cols(), 15);
  EXPECT_EQ(cb.zone(1).col(0), cb.C.col(static_cast<Eigen::Index>(encode(1, 0, 3, 5))));
  EXPECT_EQ(cb.zone(2).col(4), cb.C.col(14));
}

TEST(Channel, BlockCovarianceMatchesLsfc) {
  SystemConfig cfg;
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  const Point rho{30.0, 20.0};
  const Eigen::VectorXd g = lsfc(rho);
  Rng rng(4);
  const int n = 100000;
  const Eigen::Index F = static_cast<Eigen::Index>(topo.F());
  Eigen::VectorXd second = Eigen::VectorXd::Zero(F);
  cdouble cross01{0, 0};
  for (int i = 0; i < n; ++i) {
    const CVector h = sample_channel(rho, lsfc, cfg.A, rng);
    second += h.cwiseAbs2();
    cross01 += h[0] * std::conj(h[4]);
  }
  second /= n;
  for (Eigen::Index f = 0; f < F; ++f) EXPECT_NEAR(second[f] / g[f / 4], 1.0, 0.02);
  EXPECT_LT(std::abs(cross01 / double(n)), 0.02 * std::sqrt(g[0] * g[1]));
}

TEST(Channel, AtApLocationUnitVariance) {
  SystemConfig cfg;
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  Rng rng(5);
  double e = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) e += sample_channel(topo.aps[3], lsfc, cfg.A, rng).segment(12, 4).squaredNorm();
  EXPECT_NEAR(e / (4.0 * n), 1.0, 0.02);
}

TEST(Channel, EffectiveChannelSuperposition) {
  const SystemConfig cfg = reduced_config();
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  Rng rng(6);
  const Scenario sc = sample_scenario(cfg, topo, rng);
  const UserChannels ch = sample_channels(sc, lsfc, cfg.A, rng);
  const auto X = effective_channels(sc, ch, topo.F());
  for (std::size_t u = 0; u < sc.zones.size(); ++u) {
    CMatrix expect = CMatrix::Zero(static_cast<Eigen::Index>(cfg.M), static_cast<Eigen::Index>(topo.F()));
    for (std::size_t k = 0; k < sc.zones[u].users.size(); ++k)
      expect.row(static_cast<Eigen::Index>(sc.zones[u].users[k].message)) += ch[u][k].transpose();
    EXPECT_EQ(X[u], expect);
    for (std::size_t m = 0; m < cfg.M; ++m)
      if (sc.zones[u].multiplicity[m] == 0) EXPECT_TRUE(X[u].row(static_cast<Eigen::Index>(m)).isZero(0.0));
  }
}

TEST(Channel, TwoUsersAtSamePointDoubleCovariance) {
  SystemConfig cfg = reduced_config();
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  const Point rho{40.0, 60.0};
  Scenario sc;
  sc.M = 2;
  sc.zones.resize(1);
  sc.zones[0].multiplicity = {2, 0};
  sc.zones[0].users = {{0, rho}, {0, rho}};
  Rng rng(7);
  const Eigen::VectorXd g = lsfc(rho);
  double e = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto X = effective_channels(sc, sample_channels(sc, lsfc, cfg.A, rng), topo.F());
    e += std::norm(X[0](0, 0));
  }
  EXPECT_NEAR(e / n / (2.0 * g[0]), 1.0, 0.03);
}

TEST(Received, PureNoiseWhenSilent) {
  Rng rng(8);
  const Codebook cb = generate_codebook(64, 2, 4, rng);
  const std::vector<CMatrix> X(2, CMatrix::Zero(4, 3));
  Rng n1(9), n2(9);
  const ReceivedSignal rx = received_signal(cb, X, 0.5, 1.0, n1);
  CMatrix W(64, 3);
  ComplexNormal cn(0.5);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = cn(n2);
  EXPECT_EQ(rx.Y, W);
}

TEST(Received, NoiselessRankOne) {
  Rng rng(10);
  const Codebook cb = generate_codebook(32, 1, 4, rng);
  CMatrix X = CMatrix::Zero(4, 2);
  X.row(2) << cdouble(1, 2), cdouble(-0.5, 0.25);
  const ReceivedSignal rx = received_signal(cb, {X}, 0.0, 4.0, rng);
  const CMatrix expect = 2.0 * cb.C.col(2) * X.row(2);
  EXPECT_LT((rx.Y - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Received, EnergyBalance) {
  SystemConfig cfg;
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  Rng rng(11);
  const Scenario sc = sample_scenario(cfg, topo, rng);
  const auto X = effective_channels(sc, sample_channels(sc, lsfc, cfg.A, rng), topo.F());
  const double sigma2 = noise_variance(cfg, topo);
  double xe = 0.0;
  for (const auto& Xu : X) xe += Xu.squaredNorm();
  double got = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const Codebook cb = generate_codebook(cfg, rng);
    got += received_signal(cb, X, sigma2, cfg.NP, rng).Y.squaredNorm();
  }
  // E||C_u x||^2 = ||x||^2 (unit expected column energy)
  const double expect = cfg.NP * xe + static_cast<double>(cfg.N * topo.F()) * sigma2;
  EXPECT_NEAR(got / reps / expect, 1.0, 0.02);
}

TEST(Received, SuperpositionAcrossZones) {
  Rng rng(12);
  const Codebook cb = generate_codebook(48, 2, 6, rng);
  CMatrix X0 = CMatrix::Random(6, 4), X1 = CMatrix::Random(6, 4);
  const CMatrix Z = CMatrix::Zero(6, 4);
  const CMatrix both = received_signal(cb, {X0, X1}, 0.0, 1.0, rng).Y;
  const CMatrix a = received_signal(cb, {X0, Z}, 0.0, 1.0, rng).Y;
  const CMatrix b = received_signal(cb, {Z, X1}, 0.0, 1.0, rng).Y;
  EXPECT_LT((both - a - b).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Received, DimensionMismatchThrows) {
  Rng rng(13);
  const Codebook cb = generate_codebook(8, 2, 3, rng);
  EXPECT_THROW(received_signal(cb, {CMatrix::Zero(3, 2)}, 0.0, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(received_signal(cb, {CMatrix::Zero(3, 2), CMatrix::Zero(4, 2)}, 0.0, 1.0, rng), std::invalid_argument);
}

TEST(Received, SameSeedSameSignal) {
  const SystemConfig cfg = reduced_config();
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  auto make = [&] {
    Rng rng(14);
    const Scenario sc = sample_scenario(cfg, topo, rng);
    const Codebook cb = generate_codebook(cfg, rng);
    const auto X = effective_channels(sc, sample_channels(sc, lsfc, cfg.A, rng), topo.F());
    return received_signal(cb, X, noise_variance(cfg, topo), cfg.NP, rng).Y;
  };
  EXPECT_EQ(make(), make());
}

TEST(Dump, RoundTrip) {
  Rng rng(15);
  ChannelDump d;
  d.seed = 99;
  d.codebook = generate_codebook(8, 2, 3, rng);
  d.X = {CMatrix::Random(3, 4), CMatrix::Random(3, 4)};
  d.rx = received_signal(d.codebook, d.X, 0.1, 1.0, rng);
  std::stringstream ss;
  write_dump(ss, d);
  EXPECT_EQ(ss.str().size(), 8 + 5 * 8 + 8 + 16 * (8 * 6 + 2 * 12 + 8 * 4));
  const ChannelDump e = read_dump(ss);
  EXPECT_EQ(e.seed, 99u);
  EXPECT_EQ(e.codebook.C, d.codebook.C);
  EXPECT_EQ(e.X[1], d.X[1]);
  EXPECT_EQ(e.rx.Y, d.rx.Y);
  EXPECT_EQ(e.rx.noise_variance, 0.1);
  std::stringstream bad("NOTADUMP");
  EXPECT_THROW(read_dump(bad), std::runtime_error);
}
