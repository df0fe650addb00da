// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force references for the test suite.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tuma/amp/denoiser.hpp"
#include "tuma/amp/prior.hpp"
#include "tuma/amp/sample_bank.hpp"
#include "tuma/channel.hpp"
#include "tuma/model.hpp"
#include "tuma/rng.hpp"
#include "tuma/source.hpp"

namespace tuma {

struct GridOracleResult {
  CVector x_hat;
  Eigen::VectorXd posterior;  // k = 0..K_max
};

/// Posterior and PME by trapezoidal quadrature over D_u^k instead of Monte
/// Carlo. Each axis of the zone gets grid_res + 1 nodes; k = 2 integrates over
/// the product grid, so cost grows as grid_res^(2k). Only K_max <= 2.
inline GridOracleResult grid_oracle_denoise(const CVector& r, const Eigen::VectorXd& tau, const Zone& zone,
                                            const LsfcProfile& lsfc, const PriorTable& prior, std::size_t A,
                                            double NP, std::size_t grid_res) {
  const std::size_t K = prior.K_max();
  if (K > 2) throw std::invalid_argument("grid_oracle_denoise: K_max must be <= 2");
  if (grid_res < 1) throw std::invalid_argument("grid_oracle_denoise: grid_res must be >= 1");
  const auto B = static_cast<Eigen::Index>(lsfc.B());
  const auto Ai = static_cast<Eigen::Index>(A);
  if (r.size() != B * Ai || tau.size() != B) throw std::invalid_argument("grid_oracle_denoise: dimension mismatch");

  Eigen::VectorXd e(B);
  for (Eigen::Index b = 0; b < B; ++b) e[b] = r.segment(b * Ai, Ai).squaredNorm();

  // Nodes and normalized trapezoid weights (they sum to one: uniform density).
  const std::size_t n1 = grid_res + 1;
  std::vector<Eigen::VectorXd> gam;
  std::vector<double> wt;
  const double step = zone.side / static_cast<double>(grid_res);
  for (std::size_t j = 0; j < n1; ++j)
    for (std::size_t i = 0; i < n1; ++i) {
      const double wx = (i == 0 || i == grid_res) ? 0.5 : 1.0;
      const double wy = (j == 0 || j == grid_res) ? 0.5 : 1.0;
      wt.push_back(wx * wy / static_cast<double>(grid_res * grid_res));
      gam.push_back(lsfc({zone.origin.x + static_cast<double>(i) * step, zone.origin.y + static_cast<double>(j) * step}));
    }

  const double sqrt_np = std::sqrt(NP);
  auto log_density = [&](const Eigen::VectorXd& s) {
    double acc = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      const double v = tau[b] + NP * s[b];
      acc += static_cast<double>(A) * std::log(std::numbers::pi * v) + e[b] / v;
    }
    return -acc;
  };

  // Per k: log of the integral and the integral-weighted shrink factors, all
  // accumulated relative to a running maximum.
  std::vector<double> log_int(K + 1, -std::numeric_limits<double>::infinity());
  std::vector<Eigen::VectorXd> shrink_avg(K + 1, Eigen::VectorXd::Zero(B));
  log_int[0] = log_density(Eigen::VectorXd::Zero(B));

  auto integrate = [&](std::size_t k, auto&& visit) {
    double mx = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(B);
    visit([&](double w, const Eigen::VectorXd& s) {
      const double l = log_density(s);
      if (l > mx) {
        const double c = std::exp(mx - l);
        sum *= c;
        acc *= c;
        mx = l;
      }
      const double p = w * std::exp(l - mx);
      sum += p;
      acc += p * (sqrt_np * s.array() / (tau.array() + NP * s.array())).matrix();
    });
    log_int[k] = mx + std::log(sum);
    shrink_avg[k] = acc / sum;
  };

  if (K >= 1)
    integrate(1, [&](auto&& f) {
      for (std::size_t p = 0; p < gam.size(); ++p) f(wt[p], gam[p]);
    });
  if (K >= 2)
    integrate(2, [&](auto&& f) {
      Eigen::VectorXd s(B);
      for (std::size_t p = 0; p < gam.size(); ++p)
        for (std::size_t q = 0; q < gam.size(); ++q) {
          s = gam[p] + gam[q];
          f(wt[p] * wt[q], s);
        }
    });

  GridOracleResult out;
  out.posterior.resize(static_cast<Eigen::Index>(K + 1));
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= K; ++k) mx = std::max(mx, prior.log_pmf[k] + log_int[k]);
  for (std::size_t k = 0; k <= K; ++k)
    out.posterior[static_cast<Eigen::Index>(k)] = std::exp(prior.log_pmf[k] + log_int[k] - mx);
  out.posterior /= out.posterior.sum();

  Eigen::VectorXd h = Eigen::VectorXd::Zero(B);
  for (std::size_t k = 1; k <= K; ++k) h += out.posterior[static_cast<Eigen::Index>(k)] * shrink_avg[k];
  out.x_hat.resize(r.size());
  for (Eigen::Index b = 0; b < B; ++b) out.x_hat.segment(b * Ai, Ai) = h[b] * r.segment(b * Ai, Ai);
  return out;
}

/// Wirtinger Jacobian by central differences:
///   J(a, c) = d eta_c / d r_a = (d/dx_a - j d/dy_a) eta_c / 2.
inline CMatrix finite_diff_jacobian(const std::function<CVector(const CVector&)>& eta, const CVector& r, double h) {
  const Eigen::Index F = r.size();
  CMatrix J(F, F);
  CVector rp = r, rm = r;
  for (Eigen::Index a = 0; a < F; ++a) {
    rp[a] = r[a] + h;
    rm[a] = r[a] - h;
    const CVector dx = (eta(rp) - eta(rm)) / (2.0 * h);
    rp[a] = r[a] + cdouble(0.0, h);
    rm[a] = r[a] - cdouble(0.0, h);
    const CVector dy = (eta(rp) - eta(rm)) / (2.0 * h);
    rp[a] = rm[a] = r[a];
    J.row(a) = (0.5 * (dx - cdouble(0.0, 1.0) * dy)).transpose();
  }
  return J;
}

// ---------------------------------------------------------------------------
// Canned oracle comparisons shared by the tests, the CLI and the acceptance run.
// ---------------------------------------------------------------------------

/// Rows drawn from the decoupled model r = sqrt(NP) x + CN(0, T) with x drawn
/// from the prior and uniform positions in `zone`.
inline CMatrix decoupled_rows(std::size_t rows, const Zone& zone, const LsfcProfile& lsfc, const PriorTable& prior,
                              const Eigen::VectorXd& tau, std::size_t A, double NP, Rng& rng) {
  const auto B = static_cast<Eigen::Index>(lsfc.B());
  const auto Ai = static_cast<Eigen::Index>(A);
  CMatrix R(static_cast<Eigen::Index>(rows), B * Ai);
  std::discrete_distribution<std::size_t> kdist(prior.pmf.begin(), prior.pmf.end());
  ComplexNormal cn(1.0);
  Eigen::VectorXd g(B);
  for (Eigen::Index m = 0; m < R.rows(); ++m) {
    CVector x = CVector::Zero(B * Ai);
    const std::size_t k = kdist(rng);
    for (std::size_t j = 0; j < k; ++j) {
      lsfc.gains(uniform_in(zone, rng), g.data());
      for (Eigen::Index f = 0; f < B * Ai; ++f) x[f] += std::sqrt(g[f / Ai]) * cn(rng);
    }
    for (Eigen::Index f = 0; f < B * Ai; ++f) R(m, f) = std::sqrt(NP) * x[f] + std::sqrt(tau[f / Ai]) * cn(rng);
  }
  return R;
}

struct OnsagerCheck {
  double max_abs_error = 0.0;
  double max_abs_entry = 0.0;
};

/// Analytic Q_u against central differences of the denoiser on one random
/// instance of `cfg`: random zone, tau_b in [0.5, 2] x base_tau, M rows from
/// the decoupled model. Perturbing column a of every row at once gives the
/// row-summed Jacobian in one denoiser call, because rows are independent.
inline OnsagerCheck onsager_fd_check(const SystemConfig& cfg, std::uint64_t seed, double base_tau = 0.05,
                                     double h = 1e-6) {
  const Topology topo = build_grid_topology(cfg);
  const LsfcProfile lsfc(topo, cfg);
  const PriorTable prior = build_prior(cfg);
  Rng rng(seed);
  const SampleBank bank = SampleBank::draw(topo, lsfc, cfg.N_s, cfg.K_max, rng);
  const std::size_t u = std::uniform_int_distribution<std::size_t>(0, topo.U() - 1)(rng);
  Eigen::VectorXd tau(static_cast<Eigen::Index>(topo.B()));
  std::uniform_real_distribution<double> span(0.5, 2.0);
  for (auto& t : tau) t = base_tau * span(rng);
  CMatrix R = decoupled_rows(cfg.M, topo.zones[u], lsfc, prior, tau, cfg.A, cfg.NP, rng);

  const ZoneKernel kern(bank.zones[u], tau, cfg.A, cfg.NP);
  const CMatrix Q = denoise_rows(R, kern, prior, {.onsager = true, .keep_loglik = false}).onsager;
  auto mean_eta = [&](const CMatrix& Rp) -> CVector {
    return denoise_rows(Rp, kern, prior, {.onsager = false, .keep_loglik = false}).x_hat.colwise().mean().transpose();
  };
  const CVector r0 = CVector::Zero(R.cols());
  const CMatrix J = finite_diff_jacobian(
      [&](const CVector& d) {
        CMatrix Rp = R;
        Rp.rowwise() += d.transpose();
        return mean_eta(Rp);
      },
      r0, h);
  return {(Q - J).cwiseAbs().maxCoeff(), J.cwiseAbs().maxCoeff()};
}

struct QuadratureCheck {
  double max_rel_posterior = 0.0;
  double max_rel_xhat = 0.0;
  Eigen::VectorXd mc_posterior;
  Eigen::VectorXd grid_posterior;
};

/// One 100 m zone, one AP at its corner, K_max = 2: the Monte Carlo denoiser
/// with `num_samples` samples against grid_oracle_denoise at `grid_res`.
inline QuadratureCheck quadrature_check(std::uint64_t seed, std::size_t num_samples = 100000,
                                        std::size_t grid_res = 48, double tau = 1e-3) {
  SystemConfig cfg;
  cfg.grid_dim = 1;
  cfg.A = 2;
  cfg.M = 4;
  cfg.K_u = 4;
  cfg.M_a_u = 2;
  cfg.K_max = 2;
  const Topology topo = with_aps(build_grid_topology(cfg), {{0.0, 0.0}});
  const LsfcProfile lsfc(topo, cfg);
  const PriorTable prior = build_prior(cfg);
  const Eigen::VectorXd T = Eigen::VectorXd::Constant(1, tau);
  Rng rng(seed);
  const ZoneSamples bank = draw_zone_samples(topo.zones[0], lsfc, num_samples, cfg.K_max, rng);
  const CVector r = decoupled_rows(1, topo.zones[0], lsfc, prior, T, cfg.A, cfg.NP, rng).row(0).transpose();

  const DenoiseResult mc = pme_denoise(r, T, bank, prior, cfg.A, cfg.NP);
  const GridOracleResult grid = grid_oracle_denoise(r, T, topo.zones[0], lsfc, prior, cfg.A, cfg.NP, grid_res);
  QuadratureCheck out;
  out.mc_posterior = mc.posterior;
  out.grid_posterior = grid.posterior;
  out.max_rel_posterior = ((mc.posterior - grid.posterior).array() / grid.posterior.array()).abs().maxCoeff();
  out.max_rel_xhat = (mc.x_hat - grid.x_hat).norm() / grid.x_hat.norm();
  return out;
}

}  // namespace tuma
