// SPDX-License-Identifier: Apache-2.0
#pragma once

// Simplified AMP-DA baseline. Users pre-equalize their channels, so the
// receiver sees one scalar AWGN observation per symbol:
//   y = sqrt(NP) C g + w,   g_m = sum over users sending m of exp(-j phi_user)
// where phi is the residual phase left by imperfect CSI. The codebook is the
// usual N x (U*M) matrix treated as a single shared block.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tuma/amp/centralized.hpp"
#include "tuma/amp/prior.hpp"
#include "tuma/amp/type_estimate.hpp"
#include "tuma/channel.hpp"
#include "tuma/config.hpp"
#include "tuma/model.hpp"
#include "tuma/rng.hpp"
#include "tuma/source.hpp"

namespace tuma {

/// Quasi-static residual phase per user, phi ~ U(0, phi_max).
struct PhaseErrorModel {
  double phi_max = 0.0;

  explicit PhaseErrorModel(double phi_max_rad) : phi_max(phi_max_rad) {
    if (!(phi_max_rad >= 0.0) || !std::isfinite(phi_max_rad)) throw ConfigError("phi_max must be finite and >= 0");
  }

  /// One uniform draw per user regardless of phi_max, so sweeps over phi_max
  /// see the same underlying randomness.
  [[nodiscard]] double draw(Rng& rng) const {
    return phi_max * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
};

/// Effective gains g per zone (M x 1 each), in Scenario user order.
inline std::vector<CMatrix> phase_gains(const Scenario& sc, const PhaseErrorModel& pe, Rng& rng) {
  std::vector<CMatrix> g;
  g.reserve(sc.zones.size());
  for (const auto& z : sc.zones) {
    CMatrix gu = CMatrix::Zero(static_cast<Eigen::Index>(sc.M), 1);
    for (const auto& usr : z.users) gu(static_cast<Eigen::Index>(usr.message), 0) += std::polar(1.0, -pe.draw(rng));
    g.push_back(std::move(gu));
  }
  return g;
}

struct ScalarDenoise {
  double mean = 0.0;        // sum_k pi_k k
  double derivative = 0.0;  // d mean / d r (Wirtinger) = sqrt(NP) Var(k) / tau
  std::uint32_t k_map = 0;
};

/// PME over integer multiplicities under r = sqrt(NP) k + CN(0, tau).
/// `post` receives pi(k), k = 0..K_max.
inline ScalarDenoise scalar_denoise(cdouble r, double tau, double sqrt_np, const PriorTable& prior,
                                    Eigen::VectorXd& post) {
  const auto K = static_cast<Eigen::Index>(prior.K_max());
  post.resize(K + 1);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k <= K; ++k) {
    post[k] = prior.log_pmf[static_cast<std::size_t>(k)] - std::norm(r - sqrt_np * static_cast<double>(k)) / tau;
    mx = std::max(mx, post[k]);
  }
  // Terms below e^-700 cannot move a sum that contains 1; skipping them avoids
  // the slow libm underflow path.
  for (Eigen::Index k = 0; k <= K; ++k) post[k] = post[k] - mx < -700.0 ? 0.0 : std::exp(post[k] - mx);
  post /= post.sum();
  ScalarDenoise d;
  double m2 = 0.0;
  for (Eigen::Index k = 0; k <= K; ++k) {
    d.mean += post[k] * static_cast<double>(k);
    m2 += post[k] * static_cast<double>(k * k);
  }
  d.derivative = sqrt_np * std::max(m2 - d.mean * d.mean, 0.0) / tau;
  d.k_map = map_multiplicity(post);
  return d;
}

struct AmpdaResult {
  Eigen::MatrixXd posterior;  // (U*M) x (K_max + 1)
  std::vector<std::vector<std::uint32_t>> k_hat;  // per zone
  TypeEstimate estimate;
  AmpDiagnostics diag;
};

/// Scalar AMP on y (length N) against the whole codebook:
///   r   = C^H z + sqrt(NP) g_hat
///   g   = eta(r)
///   z   = y - sqrt(NP) [C g - (U*M / N) z <eta'>]
inline AmpdaResult run_ampda(const CVector& y, const Codebook& cb, const PriorTable& prior, double NP,
                             std::size_t iterations) {
  if (y.size() != cb.C.rows()) throw std::invalid_argument("run_ampda: y length != N");
  const double sqrt_np = std::sqrt(NP);
  const Eigen::Index W = cb.C.cols();
  const double scale = static_cast<double>(W) / static_cast<double>(y.size());

  AmpdaResult res;
  res.posterior.resize(W, static_cast<Eigen::Index>(prior.K_max() + 1));
  CVector z = y, r(W), g = CVector::Zero(W);
  Eigen::VectorXd post;
  std::vector<std::uint32_t> k_map(static_cast<std::size_t>(W), 0);
  for (std::size_t t = 1; t <= iterations; ++t) {
    const double tau = std::max(z.squaredNorm() / static_cast<double>(y.size()), kTauFloor);
    res.diag.tau_history.push_back(Eigen::VectorXd::Constant(1, tau));
    r.noalias() = cb.C.adjoint() * z;
    r += sqrt_np * g;
    double dsum = 0.0;
    for (Eigen::Index i = 0; i < W; ++i) {
      const ScalarDenoise d = scalar_denoise(r[i], tau, sqrt_np, prior, post);
      res.posterior.row(i) = post.transpose();
      g[i] = d.mean;
      dsum += d.derivative;
      k_map[static_cast<std::size_t>(i)] = d.k_map;
    }
    CVector next = y - sqrt_np * (cb.C * g);
    next += (sqrt_np * scale * dsum / static_cast<double>(W)) * z;
    z = std::move(next);
    res.diag.iterations = t;
    if (!z.allFinite() || !g.allFinite()) {
      res.diag.aborted = true;
      res.diag.abort_iteration = t;
      res.diag.abort_reason = "non-finite residual or estimate";
      break;
    }
  }
  for (std::size_t u = 0; u < cb.U; ++u)
    res.k_hat.emplace_back(k_map.begin() + static_cast<std::ptrdiff_t>(u * cb.M),
                           k_map.begin() + static_cast<std::ptrdiff_t>((u + 1) * cb.M));
  res.estimate = type_estimate(res.k_hat);
  return res;
}

/// One AMP-DA trial given the codebook: draws phases, then noise, then decodes.
inline AmpdaResult simulate_ampda(const Scenario& sc, const Codebook& cb, const SystemConfig& cfg,
                                  const Topology& topo, double phi_max, Rng& phase_rng, Rng& noise_rng) {
  const PhaseErrorModel pe(phi_max);
  const std::vector<CMatrix> g = phase_gains(sc, pe, phase_rng);
  const ReceivedSignal rx = received_signal(cb, g, noise_variance(cfg, topo), cfg.NP, noise_rng);
  return run_ampda(rx.Y.col(0), cb, build_prior(cfg), cfg.NP, cfg.T_iters);
}

/// Single-stream convenience form: codebook, phases and noise in that order.
inline AmpdaResult simulate_ampda(const Scenario& sc, const SystemConfig& cfg, const Topology& topo, double phi_max,
                                  Rng& rng) {
  const Codebook cb = generate_codebook(cfg, rng);
  return simulate_ampda(sc, cb, cfg, topo, phi_max, rng, rng);
}

}  // namespace tuma
