// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tuma {

/// MAP multiplicity; ties go to the smaller k.
template <typename Vec>
std::uint32_t map_multiplicity(const Vec& posterior) {
  std::uint32_t best = 0;
  for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(posterior.size()); ++k)
    if (posterior[k] > posterior[best]) best = static_cast<std::uint32_t>(k);
  return best;
}

/// Row-wise MAP over an (M x (K_max + 1)) posterior table.
inline std::vector<std::uint32_t> map_multiplicities(const Eigen::MatrixXd& posterior) {
  std::vector<std::uint32_t> k(static_cast<std::size_t>(posterior.rows()));
  for (Eigen::Index m = 0; m < posterior.rows(); ++m) k[static_cast<std::size_t>(m)] = map_multiplicity(posterior.row(m));
  return k;
}

struct TypeEstimate {
  std::vector<std::uint32_t> multiplicity;  // global k_hat
  std::vector<double> type;                 // t_hat, all-zero on failure
  bool decode_failure = false;              // ||k_hat||_1 == 0
};

/// t_hat = k_hat / ||k_hat||_1 with k_hat = sum_u k_hat_u.
inline TypeEstimate type_estimate(const std::vector<std::vector<std::uint32_t>>& per_zone) {
  TypeEstimate te;
  if (per_zone.empty()) {
    te.decode_failure = true;
    return te;
  }
  const std::size_t M = per_zone.front().size();
  te.multiplicity.assign(M, 0);
  for (const auto& ku : per_zone) {
    if (ku.size() != M) throw std::invalid_argument("type_estimate: zones disagree on M");
    for (std::size_t m = 0; m < M; ++m) te.multiplicity[m] += ku[m];
  }
  const double total = std::accumulate(te.multiplicity.begin(), te.multiplicity.end(), 0.0);
  te.type.assign(M, 0.0);
  if (total == 0.0) {
    te.decode_failure = true;
    return te;
  }
  for (std::size_t m = 0; m < M; ++m) te.type[m] = te.multiplicity[m] / total;
  return te;
}

/// Half the l1 distance between two types. Disjoint supports can round a few
/// ulps above 1, so the result is capped there.
inline double tv_distance(const std::vector<double>& t, const std::vector<double>& t_hat) {
  if (t.size() != t_hat.size()) throw std::invalid_argument("tv_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t m = 0; m < t.size(); ++m) acc += std::abs(t[m] - t_hat[m]);
  return std::min(0.5 * acc, 1.0);
}

}  // namespace tuma
