// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tuma {

/// Raised for any invalid or infeasible configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// System and decoder parameters. Defaults reproduce the 3x3-zone reference setup
/// (100 m zones, 40 four-antenna APs, 20 users sending 13 distinct messages per zone).
struct SystemConfig {
  std::size_t grid_dim = 3;    // zones per side
  double zone_side = 100.0;    // meters
  std::size_t A = 4;           // antennas per AP
  double d0 = 13.57;           // 3 dB cutoff distance, meters
  double alpha = 3.67;         // pathloss exponent
  std::size_t N = 1024;        // blocklength
  std::size_t M = 256;         // messages per zone
  std::size_t K_u = 20;        // active users per zone
  std::size_t M_a_u = 13;      // distinct active messages per zone
  double NP = 1.0;             // codeword energy N*P
  double snr_rx_db = -30.0;
  std::size_t T_iters = 20;
  std::size_t N_s = 500;
  std::size_t K_max = 20;      // multiplicity truncation, <= K_u
  bool fast_multiplicities = false;  // opt-in 1 + Multinomial(K_u - M_a_u) sampler (different law)

  [[nodiscard]] std::size_t num_zones() const { return grid_dim * grid_dim; }
  [[nodiscard]] double power() const { return NP / static_cast<double>(N); }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    need(grid_dim >= 1, "grid_dim >= 1");
    need(A >= 1 && N >= 1 && M >= 1 && K_u >= 1 && M_a_u >= 1, "all counts >= 1");
    need(T_iters >= 1 && N_s >= 1 && K_max >= 1, "all counts >= 1");
    need(M_a_u <= K_u && M_a_u <= M, "M_a_u <= min(K_u, M)");
    need(K_max <= K_u, "K_max <= K_u");
    need(zone_side > 0.0 && std::isfinite(zone_side), "zone_side > 0");
    need(alpha > 0.0 && std::isfinite(alpha), "alpha > 0");
    need(d0 > 0.0 && std::isfinite(d0), "d0 > 0");
    need(NP > 0.0 && std::isfinite(NP), "NP > 0");
    need(!std::isnan(snr_rx_db) && snr_rx_db > -std::numeric_limits<double>::infinity(),
         "snr_rx_db is a number above -inf (+inf means noiseless)");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return value;
}

}  // namespace detail

/// Sets one field by name. Unknown keys are a ConfigError.
inline void set_config_value(SystemConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_number;
  if (key == "grid_dim") cfg.grid_dim = parse_number<std::size_t>(key, value);
  else if (key == "zone_side") cfg.zone_side = parse_number<double>(key, value);
  else if (key == "A") cfg.A = parse_number<std::size_t>(key, value);
  else if (key == "d0") cfg.d0 = parse_number<double>(key, value);
  else if (key == "alpha") cfg.alpha = parse_number<double>(key, value);
  else if (key == "N") cfg.N = parse_number<std::size_t>(key, value);
  else if (key == "M") cfg.M = parse_number<std::size_t>(key, value);
  else if (key == "K_u") cfg.K_u = parse_number<std::size_t>(key, value);
  else if (key == "M_a_u") cfg.M_a_u = parse_number<std::size_t>(key, value);
  else if (key == "NP") cfg.NP = parse_number<double>(key, value);
  else if (key == "snr_rx_db") cfg.snr_rx_db = parse_number<double>(key, value);
  else if (key == "T_iters") cfg.T_iters = parse_number<std::size_t>(key, value);
  else if (key == "N_s") cfg.N_s = parse_number<std::size_t>(key, value);
  else if (key == "K_max") cfg.K_max = parse_number<std::size_t>(key, value);
  else if (key == "fast_multiplicities") {
    if (value == "true" || value == "1") cfg.fast_multiplicities = true;
    else if (value == "false" || value == "0") cfg.fast_multiplicities = false;
    else throw ConfigError("config key 'fast_multiplicities' expects true/false");
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
/// Keys not present keep their defaults. The result is validated.
inline SystemConfig parse_config(std::istream& in, SystemConfig cfg = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = line;
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = detail::trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    set_config_value(cfg, detail::trim(sv.substr(0, eq)), detail::trim(sv.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

inline std::string to_config_text(const SystemConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "grid_dim = " << c.grid_dim << "\nzone_side = " << c.zone_side << "\nA = " << c.A
     << "\nd0 = " << c.d0 << "\nalpha = " << c.alpha << "\nN = " << c.N << "\nM = " << c.M
     << "\nK_u = " << c.K_u << "\nM_a_u = " << c.M_a_u << "\nNP = " << c.NP
     << "\nsnr_rx_db = " << c.snr_rx_db << "\nT_iters = " << c.T_iters << "\nN_s = " << c.N_s
     << "\nK_max = " << c.K_max << "\nfast_multiplicities = " << (c.fast_multiplicities ? "true" : "false")
     << "\n";
  return os.str();
}

/// Reduced configuration that exercises every decoder path in seconds.
inline SystemConfig reduced_config() {
  SystemConfig c;
  c.grid_dim = 2;
  c.A = 2;
  c.K_u = 6;
  c.M_a_u = 4;
  c.M = 64;
  c.N = 256;
  c.N_s = 100;
  c.T_iters = 10;
  c.K_max = 6;
  return c;
}

}  // namespace tuma
