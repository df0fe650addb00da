// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "tuma/amp/denoiser.hpp"
#include "tuma/amp/prior.hpp"
#include "tuma/amp/sample_bank.hpp"
#include "tuma/amp/type_estimate.hpp"
#include "tuma/channel.hpp"
#include "tuma/config.hpp"
#include "tuma/model.hpp"

namespace tuma {

struct AmpDiagnostics {
  std::size_t iterations = 0;
  bool aborted = false;
  std::size_t abort_iteration = 0;  // 1-based, valid when aborted
  std::string abort_reason;
  std::size_t underflows = 0;
  std::vector<Eigen::VectorXd> tau_history;  // tau used by iteration t at index t - 1

  [[nodiscard]] Eigen::VectorXd final_tau() const {
    return tau_history.empty() ? Eigen::VectorXd{} : tau_history.back();
  }
};

struct AmpSettings {
  std::size_t A = 1;
  double NP = 1.0;
  std::size_t iterations = 20;
  bool keep_loglik = false;  // keep the last iteration's per-sample log-likelihoods
};

struct AmpRun {
  std::vector<Eigen::MatrixXd> posterior;  // per zone, M x (K_max + 1), last iteration
  std::vector<CMatrix> x_hat;              // per zone, M x F
  std::vector<Eigen::MatrixXd> loglik;     // per zone, M x (K_max * N_s), if kept
  std::vector<Eigen::VectorXd> loglik0;    // per zone, M, if kept
  AmpDiagnostics diag;
};

/// Multisource AMP over the columns of Y. The number of APs is
/// Y.cols() / A and must match the bank's LSFC width.
///
///   R_u   = C_u^H Z + sqrt(NP) X_u
///   X_u   = eta_u(R_u)                   (tau from the previous residual)
///   Gamma = sum_u C_u X_u - (M/N) Z Q_u
///   Z     = Y - sqrt(NP) Gamma
inline AmpRun run_multisource_amp(const CMatrix& Y, const Codebook& cb, const SampleBank& bank, const PriorTable& prior,
                                  const AmpSettings& s) {
  const auto F = Y.cols();
  const auto M = static_cast<Eigen::Index>(cb.M);
  if (Y.rows() != cb.C.rows()) throw std::invalid_argument("run_multisource_amp: Y and codebook disagree on N");
  if (bank.zones.size() != cb.U) throw std::invalid_argument("run_multisource_amp: bank has wrong zone count");
  if (F % static_cast<Eigen::Index>(s.A) != 0 ||
      static_cast<std::size_t>(F) / s.A != bank.zones.front().B())
    throw std::invalid_argument("run_multisource_amp: Y width != A * (number of APs in the bank)");

  const double sqrt_np = std::sqrt(s.NP);
  const double onsager_scale = static_cast<double>(cb.M) / static_cast<double>(cb.N());

  AmpRun run;
  run.posterior.resize(cb.U);
  run.x_hat.assign(cb.U, CMatrix::Zero(M, F));
  if (s.keep_loglik) {
    run.loglik.resize(cb.U);
    run.loglik0.resize(cb.U);
  }

  CMatrix Z = Y;
  CMatrix gamma(Y.rows(), F);
  CMatrix R(M, F);
  for (std::size_t t = 1; t <= s.iterations; ++t) {
    const Eigen::VectorXd tau = floor_tau(residual_covariance(Z, s.A));
    run.diag.tau_history.push_back(tau);
    gamma.setZero();
    const bool last = t == s.iterations;
    for (std::size_t u = 0; u < cb.U; ++u) {
      R.noalias() = cb.zone(u).adjoint() * Z;
      R += sqrt_np * run.x_hat[u];
      const ZoneKernel kern(bank.zones[u], tau, s.A, s.NP);
      DenoiseBatch d = denoise_rows(R, kern, prior, {.onsager = true, .keep_loglik = s.keep_loglik && last});
      run.diag.underflows += d.underflows;
      run.x_hat[u] = std::move(d.x_hat);
      run.posterior[u] = std::move(d.posterior);
      if (s.keep_loglik && last) {
        run.loglik[u] = std::move(d.loglik);
        run.loglik0[u] = std::move(d.loglik0);
      }
      gamma.noalias() += cb.zone(u) * run.x_hat[u];
      gamma.noalias() -= onsager_scale * (Z * d.onsager);
    }
    Z = Y - sqrt_np * gamma;
    run.diag.iterations = t;

    bool finite = Z.allFinite();
    for (const auto& X : run.x_hat) finite = finite && X.allFinite();
    if (!finite) {
      run.diag.aborted = true;
      run.diag.abort_iteration = t;
      run.diag.abort_reason = "non-finite residual or estimate";
      break;
    }
  }
  return run;
}

struct DecodeResult {
  std::vector<Eigen::MatrixXd> posterior;              // per zone, M x (K_max + 1)
  std::vector<std::vector<std::uint32_t>> k_hat;       // per zone
  TypeEstimate estimate;
  AmpDiagnostics diag;
};

inline DecodeResult finish_decode(std::vector<Eigen::MatrixXd> posterior, AmpDiagnostics diag) {
  DecodeResult res;
  res.diag = std::move(diag);
  res.posterior = std::move(posterior);
  for (const auto& p : res.posterior) res.k_hat.push_back(map_multiplicities(p));
  res.estimate = type_estimate(res.k_hat);
  return res;
}

/// Centralized decoder: draws a fresh sample bank from `rng`, runs AMP over
/// all APs, then MAP multiplicities and the type estimate.
inline DecodeResult run_centralized(const CMatrix& Y, const Codebook& cb, const Topology& topo, const SystemConfig& cfg,
                                    Rng& rng) {
  const SampleBank bank = SampleBank::draw(topo, cfg, rng);
  const PriorTable prior = build_prior(cfg);
  AmpRun run = run_multisource_amp(Y, cb, bank, prior, {.A = cfg.A, .NP = cfg.NP, .iterations = cfg.T_iters});
  return finish_decode(std::move(run.posterior), std::move(run.diag));
}

}  // namespace tuma
