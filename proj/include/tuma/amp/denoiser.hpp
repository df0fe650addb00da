// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "tuma/amp/prior.hpp"
#include "tuma/amp/sample_bank.hpp"
#include "tuma/channel.hpp"

namespace tuma {

inline constexpr double kTauFloor = 1e-12;

// Joint weights at or below this are left out of the second-order Onsager sum
// (many-AP path). The dropped mass is at most K_max * N_s * 1e-12, and each
// dropped term is bounded by 1 / (sqrt(NP) tau_min).
inline constexpr double kOnsagerPrune = 1e-12;

// Up to this many APs the second-order Onsager sum runs densely over all
// samples; above it, per row over the pruned set.
inline constexpr Eigen::Index kDenseOnsagerMaxB = 4;

// Relative log-weights below this are set to zero. Their sum against the row
// maximum is far below rounding, and left alone they end up subnormal after
// normalization, which stalls the weight GEMMs at high SNR.
inline constexpr double kWeightCutoff = -680.0;

/// Per-AP residual variance: tau_b = ||Z(:, AP b columns)||_F^2 / (N * A).
/// Equals the AP-b diagonal average of Re{Z^H Z} / N without forming Z^H Z.
inline Eigen::VectorXd residual_covariance(const CMatrix& Z, std::size_t A) {
  const auto B = Z.cols() / static_cast<Eigen::Index>(A);
  const auto Ai = static_cast<Eigen::Index>(A);
  Eigen::VectorXd tau(B);
  const double scale = 1.0 / (static_cast<double>(Z.rows()) * static_cast<double>(A));
  for (Eigen::Index b = 0; b < B; ++b) tau[b] = Z.middleCols(b * Ai, Ai).squaredNorm() * scale;
  return tau;
}

inline Eigen::VectorXd floor_tau(Eigen::VectorXd tau, double floor = kTauFloor) {
  return tau.cwiseMax(floor);
}

/// e(m, b) = sum over AP b's antennas of |R(m, f)|^2.
inline Eigen::MatrixXd ap_energies(const CMatrix& R, std::size_t A) {
  const auto Ai = static_cast<Eigen::Index>(A);
  const auto B = R.cols() / Ai;
  Eigen::MatrixXd E(R.rows(), B);
  for (Eigen::Index b = 0; b < B; ++b) E.col(b) = R.middleCols(b * Ai, Ai).cwiseAbs2().rowwise().sum();
  return E;
}

/// Everything about one zone's sample bank that depends on tau but not on the
/// observation. Built once per zone per AMP iteration.
///
/// For sample row j = (k, i):  v(j, b) = tau_b + NP * s(i, b, k)
///   inv_var(b, j) = 1 / v,  shrink(b, j) = sqrt(NP) * s / v,
///   log_norm(j)   = A * sum_b log(pi * v)
/// so that log CN(r; 0, T + NP * Sigma) = -log_norm(j) - sum_b e_b * inv_var(b, j).
struct ZoneKernel {
  std::size_t num_samples = 0;
  std::size_t max_mult = 0;
  std::size_t A = 1;
  double sqrt_np = 1.0;
  Eigen::MatrixXd inv_var;       // B x (K_max * N_s)
  Eigen::MatrixXd shrink;        // B x (K_max * N_s)
  Eigen::RowVectorXd log_norm;   // K_max * N_s
  Eigen::VectorXd inv_tau;       // B
  double log_norm0 = 0.0;        // k = 0 hypothesis: covariance T

  ZoneKernel(const ZoneSamples& bank, const Eigen::VectorXd& tau, std::size_t antennas, double NP)
      : num_samples(bank.num_samples), max_mult(bank.max_mult), A(antennas), sqrt_np(std::sqrt(NP)) {
    const double Ad = static_cast<double>(A);
    const Eigen::Index J = bank.prefix.rows();
    const Eigen::Index B = bank.prefix.cols();
    inv_var.resize(B, J);
    shrink.resize(B, J);
    log_norm.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) {
      double ln = 0.0;
      for (Eigen::Index b = 0; b < B; ++b) {
        const double s = bank.prefix(j, b);
        const double v = tau[b] + NP * s;
        const double iv = 1.0 / v;
        inv_var(b, j) = iv;
        shrink(b, j) = sqrt_np * s * iv;
        ln += std::log(std::numbers::pi * v);
      }
      log_norm[j] = Ad * ln;
    }
    inv_tau = tau.cwiseInverse();
    log_norm0 = Ad * (std::numbers::pi * tau.array()).log().sum();
  }

  [[nodiscard]] Eigen::Index B() const { return inv_var.rows(); }
  [[nodiscard]] Eigen::Index J() const { return inv_var.cols(); }
};

/// Per-sample log-likelihoods for every row of R: returns the (rows x K_max*N_s)
/// matrix and writes the k = 0 (noise-only) log-density into `loglik0`.
inline Eigen::MatrixXd batch_log_likelihoods(const Eigen::MatrixXd& energies, const ZoneKernel& kern,
                                             Eigen::VectorXd& loglik0) {
  Eigen::MatrixXd L(energies.rows(), kern.J());
  L.noalias() = -energies * kern.inv_var;
  L.rowwise() -= kern.log_norm;
  loglik0 = -(energies * kern.inv_tau).array() - kern.log_norm0;
  return L;
}

/// Normalized joint weights over (k, sample) hypotheses.
///   omega(m, j) = p(k) exp(l(m, j)) / N_s / D_m  for j = (k >= 1, i)
///   pi(m, 0)    = p(0) exp(l0(m)) / D_m
/// so pi(m, k) = sum_i omega(m, (k, i)) and the row of pi sums to one.
struct JointWeights {
  Eigen::MatrixXd omega;      // rows x (K_max * N_s)
  Eigen::MatrixXd posterior;  // rows x (K_max + 1)
  std::size_t underflows = 0;
};

namespace detail {

inline JointWeights joint_weights_block(Eigen::MatrixXd loglik, const Eigen::VectorXd& loglik0, const PriorTable& prior,
                                  std::size_t num_samples) {
  const Eigen::Index rows = loglik.rows();
  const std::size_t K = prior.K_max();
  const auto Ns = static_cast<Eigen::Index>(num_samples);
  if (loglik.cols() != static_cast<Eigen::Index>(K) * Ns)
    throw std::invalid_argument("joint_weights: log-likelihood width != K_max * N_s");

  JointWeights out;
  const double log_ns = std::log(static_cast<double>(num_samples));
  const Eigen::VectorXd head = loglik0.array() + prior.log_pmf[0];
  Eigen::VectorXd rowmax = head;
  for (std::size_t k = 1; k <= K; ++k) {
    const double shift = prior.log_pmf[k] - log_ns;
    for (Eigen::Index i = 0; i < Ns; ++i) {
      auto col = loglik.col(static_cast<Eigen::Index>(k - 1) * Ns + i);
      col.array() += shift;
      rowmax = rowmax.cwiseMax(col);
    }
  }

  // Rows with no finite hypothesis (or NaNs) are handled separately.
  std::vector<Eigen::Index> bad;
  for (Eigen::Index m = 0; m < rows; ++m)
    if (!std::isfinite(rowmax[m])) {
      bad.push_back(m);
      rowmax[m] = 0.0;
    }

  loglik.array().colwise() -= rowmax.array();
  loglik.array() = loglik.array().exp();
  {
    // plain loop so it vectorizes; Eigen's select would evaluate exp per scalar
    const double floor = std::exp(kWeightCutoff);
    double* d = loglik.data();
    const Eigen::Index n = loglik.size();
    for (Eigen::Index i = 0; i < n; ++i) d[i] = d[i] < floor ? 0.0 : d[i];
  }
  out.posterior.resize(rows, static_cast<Eigen::Index>(K + 1));
  out.posterior.col(0) = (head - rowmax).array().exp();
  for (std::size_t k = 1; k <= K; ++k) {
    auto pk = out.posterior.col(static_cast<Eigen::Index>(k));
    const auto block = loglik.middleCols(static_cast<Eigen::Index>(k - 1) * Ns, Ns);
    pk = block.col(0);
    for (Eigen::Index i = 1; i < Ns; ++i) pk += block.col(i);
  }
  const Eigen::VectorXd inv_total = out.posterior.rowwise().sum().cwiseInverse();
  loglik.array().colwise() *= inv_total.array();
  out.posterior.array().colwise() *= inv_total.array();
  for (const Eigen::Index m : bad) {
    ++out.underflows;
    loglik.row(m).setZero();
    for (std::size_t k = 0; k <= K; ++k) out.posterior(m, static_cast<Eigen::Index>(k)) = prior.pmf[k];
  }
  out.omega = std::move(loglik);
  return out;
}

}  // namespace detail

// Rows are processed in fixed tiles starting at row 0 so that the same rows
// give bit-identical weights wherever they are evaluated.
inline constexpr Eigen::Index kRowTile = 16;

/// Consumes the log-likelihood matrix (it becomes `omega`). Log-domain with
/// per-row max subtraction. A row whose hypotheses are all -inf falls back to
/// the prior with zero weights and is counted in `underflows`.
inline JointWeights joint_weights(Eigen::MatrixXd loglik, const Eigen::VectorXd& loglik0, const PriorTable& prior,
                                  std::size_t num_samples) {
  const Eigen::Index rows = loglik.rows();
  if (loglik0.size() != rows) throw std::invalid_argument("joint_weights: loglik0 length != rows");
  if (rows <= kRowTile) return detail::joint_weights_block(std::move(loglik), loglik0, prior, num_samples);
  JointWeights out;
  out.posterior.resize(rows, static_cast<Eigen::Index>(prior.K_max() + 1));
  for (Eigen::Index r0 = 0; r0 < rows; r0 += kRowTile) {
    const Eigen::Index n = std::min(kRowTile, rows - r0);
    JointWeights t = detail::joint_weights_block(loglik.middleRows(r0, n), loglik0.segment(r0, n), prior, num_samples);
    loglik.middleRows(r0, n) = t.omega;
    out.posterior.middleRows(r0, n) = t.posterior;
    out.underflows += t.underflows;
  }
  out.omega = std::move(loglik);
  return out;
}

struct DenoiseOptions {
  bool onsager = true;
  bool keep_loglik = false;
};

struct DenoiseBatch {
  CMatrix x_hat;              // rows x F
  Eigen::MatrixXd posterior;  // rows x (K_max + 1)
  CMatrix onsager;            // F x F, empty unless requested
  Eigen::MatrixXd loglik;     // rows x (K_max * N_s), empty unless requested
  Eigen::VectorXd loglik0;
  std::size_t underflows = 0;
};

/// MC posterior-mean denoiser applied to every row of R (one row per codeword).
///
/// Under the diagonal covariances the per-sample conditional mean is
/// shrink(b, j) * r_f for antenna f of AP b, so the estimate is
///   x_hat(m, f) = h(m, b) * r(m, f),  h = omega * shrink^T.
///
/// The Onsager matrix is Q = (1/rows) * sum_m J_m with
///   J_m(a, c) = d x_hat_c / d r_a = delta(a, c) h_{b(c)} + conj(r_a) r_c G_m(b(c), b(a))
/// where G_m = dh/de (e = per-AP energies) has the closed form
///   G(beta, alpha) = h_beta * ubar_alpha - sum_j omega_j shrink(beta, j) inv_var(alpha, j),
///   ubar_alpha     = pi_0 / tau_alpha + sum_j omega_j inv_var(alpha, j).
inline DenoiseBatch denoise_rows(const CMatrix& R, const ZoneKernel& kern, const PriorTable& prior,
                                 DenoiseOptions opt = {}) {
  if (R.cols() != kern.B() * static_cast<Eigen::Index>(kern.A))
    throw std::invalid_argument("denoise_rows: R width != B * A");
  if (prior.K_max() != kern.max_mult) throw std::invalid_argument("denoise_rows: prior and bank disagree on K_max");

  const auto A = static_cast<Eigen::Index>(kern.A);
  const Eigen::Index B = kern.B();
  const Eigen::Index F = R.cols();
  const Eigen::Index rows = R.rows();

  DenoiseBatch out;
  out.x_hat.resize(rows, F);
  out.posterior.resize(rows, static_cast<Eigen::Index>(kern.max_mult + 1));
  out.loglik0.resize(rows);
  if (opt.keep_loglik) out.loglik.resize(rows, kern.J());
  Eigen::MatrixXd H(rows, B);

  // g[alpha](m, beta) = G_m(beta, alpha)
  std::vector<Eigen::MatrixXd> g;
  Eigen::MatrixXd P;  // dense path: P(j, alpha * B + beta) = shrink(beta, j) inv_var(alpha, j)
  const bool dense = B <= kDenseOnsagerMaxB;
  const Eigen::VectorXd tau = kern.inv_tau.cwiseInverse();
  const double inv_sqrt_np = 1.0 / kern.sqrt_np;
  if (opt.onsager) {
    g.assign(static_cast<std::size_t>(B), Eigen::MatrixXd(rows, B));
    if (dense) {
      P.resize(kern.J(), B * B);
      for (Eigen::Index alpha = 0; alpha < B; ++alpha)
        for (Eigen::Index beta = 0; beta < B; ++beta)
          P.col(alpha * B + beta) = (kern.shrink.row(beta).array() * kern.inv_var.row(alpha).array()).transpose();
    }
  }

  Eigen::MatrixXd Ht, ubar, second, W, M2(B, B);
  std::vector<std::vector<Eigen::Index>> keep;
  for (Eigen::Index r0 = 0; r0 < rows; r0 += kRowTile) {
    const Eigen::Index n = std::min(kRowTile, rows - r0);
    const auto Rt = R.middleRows(r0, n);
    Eigen::VectorXd l0;
    Eigen::MatrixXd L = batch_log_likelihoods(ap_energies(Rt, kern.A), kern, l0);
    if (opt.keep_loglik) out.loglik.middleRows(r0, n) = L;
    out.loglik0.segment(r0, n) = l0;
    JointWeights w = detail::joint_weights_block(std::move(L), l0, prior, kern.num_samples);
    out.posterior.middleRows(r0, n) = w.posterior;
    out.underflows += w.underflows;

    Ht.noalias() = w.omega * kern.shrink.transpose();
    H.middleRows(r0, n) = Ht;
    for (Eigen::Index b = 0; b < B; ++b)
      out.x_hat.block(r0, b * A, n, A) = Ht.col(b).asDiagonal() * Rt.middleCols(b * A, A);

    if (!opt.onsager) continue;
    ubar.noalias() = w.omega * kern.inv_var.transpose();
    ubar += w.posterior.col(0) * kern.inv_tau.transpose();

    if (dense) {
      // second_m(beta, alpha) = sum_j omega(m, j) shrink(beta, j) inv_var(alpha, j), all j
      second.noalias() = w.omega * P;
      for (Eigen::Index alpha = 0; alpha < B; ++alpha)
        for (Eigen::Index beta = 0; beta < B; ++beta)
          g[static_cast<std::size_t>(alpha)].col(beta).segment(r0, n) =
              Ht.col(beta).cwiseProduct(ubar.col(alpha)) - second.col(alpha * B + beta);
      continue;
    }

    // shrink(beta, j) = (1 - tau_beta inv_var(beta, j)) / sqrt(NP), so
    //   second(beta, alpha) = [u(alpha) - tau_beta M2(beta, alpha)] / sqrt(NP)
    // with u = sum_j omega_j inv_var(., j) and symmetric
    //   M2 = sum_j omega_j inv_var(., j) inv_var(., j)^T,
    // summed over the weights above kOnsagerPrune.
    keep.assign(static_cast<std::size_t>(n), {});
    for (Eigen::Index j = 0; j < kern.J(); ++j) {
      const double* col = w.omega.col(j).data();
      for (Eigen::Index m = 0; m < n; ++m)
        if (col[m] > kOnsagerPrune) keep[static_cast<std::size_t>(m)].push_back(j);
    }
    for (Eigen::Index m = 0; m < n; ++m) {
      const auto& km = keep[static_cast<std::size_t>(m)];
      W.resize(B, static_cast<Eigen::Index>(km.size()));
      for (std::size_t q = 0; q < km.size(); ++q)
        W.col(static_cast<Eigen::Index>(q)) = kern.inv_var.col(km[q]) * std::sqrt(w.omega(m, km[q]));
      M2.noalias() = W * W.transpose();
      for (Eigen::Index alpha = 0; alpha < B; ++alpha) {
        auto& ga = g[static_cast<std::size_t>(alpha)];
        const double ua = ubar(m, alpha);
        const double u = ua - w.posterior(m, 0) * kern.inv_tau[alpha];
        for (Eigen::Index beta = 0; beta < B; ++beta)
          ga(r0 + m, beta) = Ht(m, beta) * ua - inv_sqrt_np * (u - tau[beta] * M2(beta, alpha));
      }
    }
  }
  if (!opt.onsager) return out;

  out.onsager = CMatrix::Zero(F, F);
  CMatrix scaled(rows, F);
  for (Eigen::Index alpha = 0; alpha < B; ++alpha) {
    const auto& ga = g[static_cast<std::size_t>(alpha)];
    for (Eigen::Index beta = 0; beta < B; ++beta)
      scaled.middleCols(beta * A, A) = ga.col(beta).asDiagonal() * R.middleCols(beta * A, A);
    out.onsager.middleRows(alpha * A, A).noalias() = R.middleCols(alpha * A, A).adjoint() * scaled;
  }
  const Eigen::VectorXd hsum = H.colwise().sum().transpose();
  for (Eigen::Index f = 0; f < F; ++f) out.onsager(f, f) += hsum[f / A];
  out.onsager /= static_cast<double>(rows);
  return out;
}

// ---------------------------------------------------------------------------
// Single-codeword entry points (tests, oracles, tooling).
// ---------------------------------------------------------------------------

/// log p(r | rho^i_{1:k}) for every sample i, straight from the diagonal form
///   -sum_b [ A log(pi v_b) + e_b / v_b ],  v_b = tau_b + NP s(i, b, k).
inline Eigen::VectorXd log_likelihoods(const CVector& r, const Eigen::VectorXd& tau, const ZoneSamples& bank,
                                       std::size_t k, std::size_t A, double NP) {
  if (k < 1 || k > bank.max_mult) throw std::out_of_range("log_likelihoods: k must be in 1..K_max");
  const auto B = static_cast<Eigen::Index>(bank.B());
  const auto Ai = static_cast<Eigen::Index>(A);
  if (r.size() != B * Ai) throw std::invalid_argument("log_likelihoods: r length != B * A");
  Eigen::VectorXd e(B);
  for (Eigen::Index b = 0; b < B; ++b) e[b] = r.segment(b * Ai, Ai).squaredNorm();
  Eigen::VectorXd out(static_cast<Eigen::Index>(bank.num_samples));
  for (std::size_t i = 0; i < bank.num_samples; ++i) {
    double acc = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      const double v = tau[b] + NP * bank.prefix(bank.row(k, i), b);
      acc += static_cast<double>(A) * std::log(std::numbers::pi * v) + e[b] / v;
    }
    out[static_cast<Eigen::Index>(i)] = -acc;
  }
  return out;
}

struct DenoiseResult {
  CVector x_hat;
  Eigen::VectorXd posterior;  // k = 0..K_max
  Eigen::VectorXd loglik;     // K_max * N_s, row (k - 1) * N_s + i
  double loglik0 = 0.0;
  bool underflow = false;
};

inline DenoiseResult pme_denoise(const CVector& r, const Eigen::VectorXd& tau, const ZoneSamples& bank,
                                 const PriorTable& prior, std::size_t A, double NP) {
  const ZoneKernel kern(bank, tau, A, NP);
  const CMatrix R = r.transpose();
  DenoiseBatch b = denoise_rows(R, kern, prior, {.onsager = false, .keep_loglik = true});
  DenoiseResult out;
  out.x_hat = b.x_hat.row(0).transpose();
  out.posterior = b.posterior.row(0).transpose();
  out.loglik = b.loglik.row(0).transpose();
  out.loglik0 = b.loglik0[0];
  out.underflow = b.underflows > 0;
  return out;
}

/// Q_u: average Jacobian (Wirtinger, dx_hat_c / dr_a) over the rows of R.
inline CMatrix onsager(const CMatrix& R, const Eigen::VectorXd& tau, const ZoneSamples& bank, const PriorTable& prior,
                       std::size_t A, double NP) {
  const ZoneKernel kern(bank, tau, A, NP);
  return denoise_rows(R, kern, prior, {.onsager = true, .keep_loglik = false}).onsager;
}

}  // namespace tuma
