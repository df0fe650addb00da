// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "tuma/amp/centralized.hpp"
#include "tuma/amp/denoiser.hpp"
#include "tuma/amp/prior.hpp"
#include "tuma/amp/sample_bank.hpp"
#include "tuma/amp/type_estimate.hpp"
#include "tuma/channel.hpp"
#include "tuma/config.hpp"
#include "tuma/model.hpp"

namespace tuma {

/// Local log-likelihoods one AP sends to the CPU for one codeword (u, m).
///
/// Wire layout (little-endian):
///   u32 b, u32 u, u32 m, u32 K_max, u32 N_s,
///   f64 loglik0, f64 loglik[K_max * N_s]   (index (k - 1) * N_s + i)
struct LikelihoodMessage {
  std::uint32_t ap = 0;
  std::uint32_t zone = 0;
  std::uint32_t message = 0;
  std::uint32_t max_mult = 0;
  std::uint32_t num_samples = 0;
  double loglik0 = 0.0;
  std::vector<double> loglik;

  static constexpr std::size_t kHeaderBytes = 5 * sizeof(std::uint32_t);

  [[nodiscard]] std::size_t wire_size() const { return kHeaderBytes + sizeof(double) * (1 + loglik.size()); }

  [[nodiscard]] std::vector<std::uint8_t> serialize() const {
    static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");
    if (loglik.size() != static_cast<std::size_t>(max_mult) * num_samples)
      throw std::invalid_argument("LikelihoodMessage: payload length != K_max * N_s");
    std::vector<std::uint8_t> out(wire_size());
    std::uint8_t* p = out.data();
    for (const std::uint32_t v : {ap, zone, message, max_mult, num_samples}) {
      std::memcpy(p, &v, sizeof v);
      p += sizeof v;
    }
    std::memcpy(p, &loglik0, sizeof loglik0);
    p += sizeof loglik0;
    std::memcpy(p, loglik.data(), sizeof(double) * loglik.size());
    return out;
  }

  static LikelihoodMessage deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderBytes + sizeof(double)) throw std::invalid_argument("LikelihoodMessage: truncated header");
    LikelihoodMessage msg;
    const std::uint8_t* p = bytes.data();
    for (std::uint32_t* v : {&msg.ap, &msg.zone, &msg.message, &msg.max_mult, &msg.num_samples}) {
      std::memcpy(v, p, sizeof *v);
      p += sizeof *v;
    }
    const std::size_t n = static_cast<std::size_t>(msg.max_mult) * msg.num_samples;
    if (bytes.size() != kHeaderBytes + sizeof(double) * (1 + n))
      throw std::invalid_argument("LikelihoodMessage: size does not match header");
    std::memcpy(&msg.loglik0, p, sizeof msg.loglik0);
    p += sizeof msg.loglik0;
    msg.loglik.resize(n);
    std::memcpy(msg.loglik.data(), p, sizeof(double) * n);
    return msg;
  }
};

/// Output of one AP's local AMP: the last iteration's per-sample
/// log-likelihoods for every zone, plus its own diagnostics.
struct LocalApResult {
  std::size_t ap = 0;
  bool failed = false;
  std::vector<Eigen::MatrixXd> loglik;   // per zone, M x (K_max * N_s)
  std::vector<Eigen::VectorXd> loglik0;  // per zone, M
  std::vector<Eigen::MatrixXd> posterior;  // local posterior, per zone
  AmpDiagnostics diag;

  [[nodiscard]] std::vector<LikelihoodMessage> messages(std::size_t num_samples) const {
    std::vector<LikelihoodMessage> out;
    for (std::size_t u = 0; u < loglik.size(); ++u) {
      const auto& L = loglik[u];
      for (Eigen::Index m = 0; m < L.rows(); ++m) {
        LikelihoodMessage msg;
        msg.ap = static_cast<std::uint32_t>(ap);
        msg.zone = static_cast<std::uint32_t>(u);
        msg.message = static_cast<std::uint32_t>(m);
        msg.num_samples = static_cast<std::uint32_t>(num_samples);
        msg.max_mult = static_cast<std::uint32_t>(static_cast<std::size_t>(L.cols()) / num_samples);
        msg.loglik0 = loglik0[u][m];
        msg.loglik.resize(static_cast<std::size_t>(L.cols()));
        Eigen::Map<Eigen::RowVectorXd>(msg.loglik.data(), L.cols()) = L.row(m);
        out.push_back(std::move(msg));
      }
    }
    return out;
  }
};

/// Fully local AMP at AP b: its own A antenna columns of Y, its own residual
/// and tau_b, the shared bank restricted to its LSFC column, and a local
/// A x A Onsager term.
inline LocalApResult run_local_ap(const CMatrix& Y_b, std::size_t b, const Codebook& cb, const SampleBank& bank,
                                  const PriorTable& prior, const SystemConfig& cfg) {
  if (Y_b.cols() != static_cast<Eigen::Index>(cfg.A)) throw std::invalid_argument("run_local_ap: Y_b must have A columns");
  const SampleBank local = bank.zones.front().B() == 1 ? bank : bank.restricted(b);
  AmpRun run = run_multisource_amp(Y_b, cb, local, prior,
                                   {.A = cfg.A, .NP = cfg.NP, .iterations = cfg.T_iters, .keep_loglik = true});
  LocalApResult res;
  res.ap = b;
  res.failed = run.diag.aborted;
  res.diag = std::move(run.diag);
  if (!res.failed) {
    res.loglik = std::move(run.loglik);
    res.loglik0 = std::move(run.loglik0);
    res.posterior = std::move(run.posterior);
  }
  return res;
}

/// Per-zone running sums of the local log-likelihoods at the CPU. APs are
/// added in the order they arrive; run_distributed adds them in index order.
struct LikelihoodAccumulator {
  std::vector<Eigen::MatrixXd> loglik;
  std::vector<Eigen::VectorXd> loglik0;
  std::size_t contributors = 0;

  void add(const std::vector<Eigen::MatrixXd>& L, const std::vector<Eigen::VectorXd>& L0) {
    if (contributors == 0) {
      loglik = L;
      loglik0 = L0;
    } else {
      if (L.size() != loglik.size()) throw std::invalid_argument("LikelihoodAccumulator: zone count mismatch");
      for (std::size_t u = 0; u < L.size(); ++u) {
        loglik[u] += L[u];
        loglik0[u] += L0[u];
      }
    }
    ++contributors;
  }
};

struct AggregatedPosterior {
  Eigen::VectorXd posterior;  // k = 0..K_max
  std::uint32_t k_hat = 0;
  bool underflow = false;
};

/// CPU fusion for one codeword: per sample, sum the local log-likelihoods
/// over APs, then the usual prior-weighted MC posterior and MAP. An empty
/// message set returns the prior.
inline AggregatedPosterior aggregate_posterior(const std::vector<LikelihoodMessage>& msgs, const PriorTable& prior) {
  AggregatedPosterior out;
  if (msgs.empty()) {
    out.posterior = Eigen::Map<const Eigen::VectorXd>(prior.pmf.data(), static_cast<Eigen::Index>(prior.pmf.size()));
    out.k_hat = map_multiplicity(out.posterior);
    return out;
  }
  const auto& first = msgs.front();
  if (first.max_mult != prior.K_max()) throw std::invalid_argument("aggregate_posterior: K_max disagrees with prior");
  Eigen::MatrixXd L = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(first.loglik.size()));
  Eigen::VectorXd L0 = Eigen::VectorXd::Zero(1);
  for (const auto& msg : msgs) {
    if (msg.zone != first.zone || msg.message != first.message || msg.max_mult != first.max_mult ||
        msg.num_samples != first.num_samples || msg.loglik.size() != first.loglik.size())
      throw std::invalid_argument("aggregate_posterior: messages disagree on (u, m) or the sample grid");
    L.row(0) += Eigen::Map<const Eigen::RowVectorXd>(msg.loglik.data(), static_cast<Eigen::Index>(msg.loglik.size()));
    L0[0] += msg.loglik0;
  }
  JointWeights w = joint_weights(std::move(L), L0, prior, first.num_samples);
  out.posterior = w.posterior.row(0).transpose();
  out.underflow = w.underflows > 0;
  out.k_hat = map_multiplicity(out.posterior);
  return out;
}

struct DistributedResult {
  DecodeResult decode;
  std::size_t surviving_aps = 0;
  std::vector<std::size_t> failed_aps;
  std::uint64_t fronthaul_bytes = 0;
  std::vector<AmpDiagnostics> ap_diagnostics;
};

/// Distributed decoder over an explicit bank. Every AP uses the same bank.
inline DistributedResult run_distributed(const CMatrix& Y, const Codebook& cb, const Topology& topo,
                                         const SystemConfig& cfg, const SampleBank& bank) {
  const PriorTable prior = build_prior(cfg);
  const auto A = static_cast<Eigen::Index>(cfg.A);
  if (Y.cols() != static_cast<Eigen::Index>(topo.F())) throw std::invalid_argument("run_distributed: Y width != F");

  DistributedResult res;
  LikelihoodAccumulator acc;
  for (std::size_t b = 0; b < topo.B(); ++b) {
    LocalApResult local = run_local_ap(Y.middleCols(static_cast<Eigen::Index>(b) * A, A), b, cb, bank, prior, cfg);
    res.ap_diagnostics.push_back(local.diag);
    if (local.failed) {
      res.failed_aps.push_back(b);
      continue;
    }
    acc.add(local.loglik, local.loglik0);
  }
  res.surviving_aps = acc.contributors;
  res.fronthaul_bytes = static_cast<std::uint64_t>(res.surviving_aps) * cb.U * cb.M *
                        (static_cast<std::uint64_t>(cfg.K_max) * cfg.N_s + 1) * sizeof(double);

  AmpDiagnostics diag;
  diag.iterations = cfg.T_iters;
  std::vector<Eigen::MatrixXd> posterior(cb.U);
  for (std::size_t u = 0; u < cb.U; ++u) {
    if (acc.contributors == 0) {
      posterior[u] = Eigen::RowVectorXd::Map(prior.pmf.data(), static_cast<Eigen::Index>(prior.pmf.size()))
                         .replicate(static_cast<Eigen::Index>(cb.M), 1);
      continue;
    }
    JointWeights w = joint_weights(std::move(acc.loglik[u]), acc.loglik0[u], prior, cfg.N_s);
    diag.underflows += w.underflows;
    posterior[u] = std::move(w.posterior);
  }
  if (acc.contributors == 0) {
    diag.aborted = true;
    diag.abort_reason = "every AP failed";
  }
  for (const auto& d : res.ap_diagnostics) diag.underflows += d.underflows;
  res.decode = finish_decode(std::move(posterior), std::move(diag));
  return res;
}

/// Draws the shared bank from `rng` (the same draw run_centralized makes).
inline DistributedResult run_distributed(const CMatrix& Y, const Codebook& cb, const Topology& topo,
                                         const SystemConfig& cfg, Rng& rng) {
  const SampleBank bank = SampleBank::draw(topo, cfg, rng);
  return run_distributed(Y, cb, topo, cfg, bank);
}

}  // namespace tuma
