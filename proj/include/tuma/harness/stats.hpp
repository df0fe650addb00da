// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace tuma {

struct SummaryStats {
  std::size_t n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_dev = std::numeric_limits<double>::quiet_NaN();  // sample (n - 1) standard deviation
  double ci95_lo = std::numeric_limits<double>::quiet_NaN();
  double ci95_hi = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr double kZ95 = 1.959963984540054;

/// Two-pass mean and sample deviation; normal-approximation 95% CI of the mean.
/// std and CI are NaN for n < 2 (CI collapses to the mean for n == 1).
inline SummaryStats summarize(const std::vector<double>& x) {
  SummaryStats s;
  s.n = x.size();
  if (x.empty()) return s;
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n == 1) {
    s.ci95_lo = s.ci95_hi = s.mean;
    return s;
  }
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
  const double half = kZ95 * s.std_dev / std::sqrt(static_cast<double>(s.n));
  s.ci95_lo = s.mean - half;
  s.ci95_hi = s.mean + half;
  return s;
}

}  // namespace tuma
