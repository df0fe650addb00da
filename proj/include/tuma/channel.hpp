// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tuma/model.hpp"
#include "tuma/rng.hpp"
#include "tuma/source.hpp"

namespace tuma {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// N x (U*M) codebook; zone u owns columns [u*M, (u+1)*M).
struct Codebook {
  CMatrix C;
  std::size_t U = 0;
  std::size_t M = 0;

  [[nodiscard]] auto zone(std::size_t u) const {
    return C.middleCols(static_cast<Eigen::Index>(u * M), static_cast<Eigen::Index>(M));
  }
  [[nodiscard]] std::size_t N() const { return static_cast<std::size_t>(C.rows()); }
};

/// Fresh Gaussian codebook with i.i.d. CN(0, 1/N) entries (not renormalized).
inline Codebook generate_codebook(std::size_t N, std::size_t U, std::size_t M, Rng& rng) {
  Codebook cb{CMatrix(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(U * M)), U, M};
  ComplexNormal cn(1.0 / static_cast<double>(N));
  cdouble* p = cb.C.data();
  for (Eigen::Index i = 0; i < cb.C.size(); ++i) p[i] = cn(rng);
  return cb;
}

inline Codebook generate_codebook(const SystemConfig& cfg, Rng& rng) {
  return generate_codebook(cfg.N, cfg.num_zones(), cfg.M, rng);
}

/// One CN(0, Sigma(rho)) channel vector per user, in Scenario user order.
using UserChannels = std::vector<std::vector<CVector>>;

inline CVector sample_channel(Point rho, const LsfcProfile& lsfc, std::size_t A, Rng& rng) {
  const Eigen::VectorXd g = lsfc(rho);
  CVector h(static_cast<Eigen::Index>(g.size() * static_cast<Eigen::Index>(A)));
  ComplexNormal unit(1.0);
  for (Eigen::Index b = 0; b < g.size(); ++b) {
    const double sd = std::sqrt(g[b]);
    for (std::size_t a = 0; a < A; ++a) h[b * static_cast<Eigen::Index>(A) + static_cast<Eigen::Index>(a)] = sd * unit(rng);
  }
  return h;
}

inline UserChannels sample_channels(const Scenario& sc, const LsfcProfile& lsfc, std::size_t A, Rng& rng) {
  UserChannels out(sc.zones.size());
  for (std::size_t u = 0; u < sc.zones.size(); ++u)
    for (const auto& usr : sc.zones[u].users) out[u].push_back(sample_channel(usr.position, lsfc, A, rng));
  return out;
}

/// X_u (M x F): row m is the sum of the channels of the users sending m; zero if inactive.
inline std::vector<CMatrix> effective_channels(const Scenario& sc, const UserChannels& channels, std::size_t F) {
  std::vector<CMatrix> X;
  X.reserve(sc.zones.size());
  for (std::size_t u = 0; u < sc.zones.size(); ++u) {
    CMatrix Xu = CMatrix::Zero(static_cast<Eigen::Index>(sc.M), static_cast<Eigen::Index>(F));
    const auto& users = sc.zones[u].users;
    if (channels.at(u).size() != users.size()) throw std::invalid_argument("effective_channels: user/channel count mismatch");
    for (std::size_t k = 0; k < users.size(); ++k) {
      if (channels[u][k].size() != static_cast<Eigen::Index>(F)) throw std::invalid_argument("effective_channels: channel length != F");
      Xu.row(static_cast<Eigen::Index>(users[k].message)) += channels[u][k].transpose();
    }
    X.push_back(std::move(Xu));
  }
  return X;
}

struct ReceivedSignal {
  CMatrix Y;  // N x F
  double noise_variance = 0.0;
};

/// Y = sqrt(NP) * sum_u C_u X_u + W, W i.i.d. CN(0, sigma_w^2).
inline ReceivedSignal received_signal(const Codebook& cb, const std::vector<CMatrix>& X, double sigma2, double NP, Rng& rng) {
  if (X.size() != cb.U) throw std::invalid_argument("received_signal: expected one X_u per zone");
  const Eigen::Index F = X.empty() ? 0 : X.front().cols();
  for (const auto& Xu : X)
    if (Xu.rows() != static_cast<Eigen::Index>(cb.M) || Xu.cols() != F)
      throw std::invalid_argument("received_signal: X_u must be M x F");
  ReceivedSignal rs;
  rs.noise_variance = sigma2;
  rs.Y = CMatrix::Zero(cb.C.rows(), F);
  for (std::size_t u = 0; u < cb.U; ++u) rs.Y.noalias() += cb.zone(u) * X[u];
  rs.Y *= std::sqrt(NP);
  if (sigma2 > 0.0) {
    ComplexNormal cn(sigma2);
    cdouble* p = rs.Y.data();
    for (Eigen::Index i = 0; i < rs.Y.size(); ++i) p[i] += cn(rng);
  }
  return rs;
}

// ---------------------------------------------------------------------------
// Debug dump of (C, X, Y). Little-endian:
//   char[8] "TUMADMP1" | u64 seed | u64 N | u64 U | u64 M | u64 F | f64 sigma2
//   C: N x (U*M), then X_1..X_U: M x F each, then Y: N x F.
// Matrices are column-major, each entry written as (re, im) f64 pairs.
// ---------------------------------------------------------------------------

struct ChannelDump {
  std::uint64_t seed = 0;
  Codebook codebook;
  std::vector<CMatrix> X;
  ReceivedSignal rx;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated binary stream");
  return v;
}
inline void put_matrix(std::ostream& os, const CMatrix& m) {
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(cdouble)));
}
inline CMatrix get_matrix(std::istream& is, std::uint64_t rows, std::uint64_t cols) {
  CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(cdouble))))
    throw std::runtime_error("truncated binary stream");
  return m;
}

}  // namespace detail

inline constexpr std::array<char, 8> kDumpMagic{'T', 'U', 'M', 'A', 'D', 'M', 'P', '1'};

inline void write_dump(std::ostream& os, const ChannelDump& d) {
  os.write(kDumpMagic.data(), kDumpMagic.size());
  const auto F = static_cast<std::uint64_t>(d.rx.Y.cols());
  detail::put<std::uint64_t>(os, d.seed);
  detail::put<std::uint64_t>(os, d.codebook.N());
  detail::put<std::uint64_t>(os, d.codebook.U);
  detail::put<std::uint64_t>(os, d.codebook.M);
  detail::put<std::uint64_t>(os, F);
  detail::put<double>(os, d.rx.noise_variance);
  detail::put_matrix(os, d.codebook.C);
  for (const auto& Xu : d.X) detail::put_matrix(os, Xu);
  detail::put_matrix(os, d.rx.Y);
}

inline ChannelDump read_dump(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kDumpMagic) throw std::runtime_error("not a channel dump");
  ChannelDump d;
  d.seed = detail::get<std::uint64_t>(is);
  const auto N = detail::get<std::uint64_t>(is);
  const auto U = detail::get<std::uint64_t>(is);
  const auto M = detail::get<std::uint64_t>(is);
  const auto F = detail::get<std::uint64_t>(is);
  d.rx.noise_variance = detail::get<double>(is);
  d.codebook.U = U;
  d.codebook.M = M;
  d.codebook.C = detail::get_matrix(is, N, U * M);
  for (std::uint64_t u = 0; u < U; ++u) d.X.push_back(detail::get_matrix(is, M, F));
  d.rx.Y = detail::get_matrix(is, N, F);
  return d;
}

}  // namespace tuma
