// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tuma/config.hpp"
#include "tuma/model.hpp"
#include "tuma/rng.hpp"

namespace tuma {

struct User {
  std::size_t message = 0;
  Point position;
};

struct ZoneActivity {
  std::vector<std::size_t> active;          // sorted active message indices
  std::vector<std::uint32_t> multiplicity;  // length M
  std::vector<User> users;                  // grouped by message, in `active` order
};

/// Ground truth of one transmission: per-zone activity plus the global
/// multiplicity and type. Indices are 0-based.
struct Scenario {
  std::size_t M = 0;
  std::vector<ZoneActivity> zones;
  std::vector<std::uint32_t> global_multiplicity;  // k_m = sum_u k_{u,m}
  std::vector<double> type;                         // t = k / K_a

  [[nodiscard]] std::size_t total_users() const {
    return std::accumulate(global_multiplicity.begin(), global_multiplicity.end(), std::size_t{0});
  }
};

/// Column of the codebook used by zone u for message m (0-based).
inline std::size_t encode(std::size_t u, std::size_t m, std::size_t U, std::size_t M) {
  if (u >= U || m >= M) throw std::out_of_range("encode: zone or message index out of range");
  return u * M + m;
}

namespace detail {

inline constexpr std::size_t kRejectionCap = 1'000'000;

/// Multinomial(K, uniform over `bins`) conditioned on every bin >= 1, by rejection.
inline std::vector<std::uint32_t> conditioned_multinomial(std::size_t K, std::size_t bins, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, bins - 1);
  std::vector<std::uint32_t> counts(bins);
  for (std::size_t attempt = 0; attempt < kRejectionCap; ++attempt) {
    std::fill(counts.begin(), counts.end(), 0u);
    for (std::size_t k = 0; k < K; ++k) ++counts[pick(rng)];
    if (std::all_of(counts.begin(), counts.end(), [](auto c) { return c > 0; })) return counts;
  }
  throw ConfigError("multiplicity sampler: rejection cap exceeded (K_u=" + std::to_string(K) +
                    ", M_a_u=" + std::to_string(bins) + " is infeasible in practice)");
}

// Fast mode: 1 + Multinomial(K - bins). Not the conditioned law; opt-in only.
inline std::vector<std::uint32_t> shifted_multinomial(std::size_t K, std::size_t bins, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, bins - 1);
  std::vector<std::uint32_t> counts(bins, 1u);
  for (std::size_t k = bins; k < K; ++k) ++counts[pick(rng)];
  return counts;
}

}  // namespace detail

inline Point uniform_in(const Zone& z, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, z.side);
  const double x = unif(rng);
  const double y = unif(rng);
  return {z.origin.x + x, z.origin.y + y};
}

inline Scenario sample_scenario(const SystemConfig& cfg, const Topology& topo, Rng& rng) {
  Scenario sc;
  sc.M = cfg.M;
  sc.global_multiplicity.assign(cfg.M, 0);
  std::vector<std::size_t> all(cfg.M);
  std::iota(all.begin(), all.end(), std::size_t{0});

  for (std::size_t u = 0; u < topo.U(); ++u) {
    ZoneActivity za;
    // partial Fisher-Yates: uniform subset of size M_a_u
    for (std::size_t i = 0; i < cfg.M_a_u; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cfg.M - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    za.active.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.M_a_u));
    std::sort(za.active.begin(), za.active.end());

    const auto counts = cfg.fast_multiplicities ? detail::shifted_multinomial(cfg.K_u, cfg.M_a_u, rng)
                                                : detail::conditioned_multinomial(cfg.K_u, cfg.M_a_u, rng);
    za.multiplicity.assign(cfg.M, 0);
    for (std::size_t j = 0; j < za.active.size(); ++j) {
      const std::size_t m = za.active[j];
      za.multiplicity[m] = counts[j];
      sc.global_multiplicity[m] += counts[j];
      for (std::uint32_t c = 0; c < counts[j]; ++c) za.users.push_back({m, uniform_in(topo.zones[u], rng)});
    }
    sc.zones.push_back(std::move(za));
  }
  const double Ka = static_cast<double>(sc.total_users());
  sc.type.resize(cfg.M);
  for (std::size_t m = 0; m < cfg.M; ++m) sc.type[m] = sc.global_multiplicity[m] / Ka;
  return sc;
}

/// JSON with 1-based zone and message indices.
inline nlohmann::json to_json(const Scenario& sc) {
  nlohmann::json j;
  j["M"] = sc.M;
  j["zones"] = nlohmann::json::array();
  for (std::size_t u = 0; u < sc.zones.size(); ++u) {
    const auto& z = sc.zones[u];
    nlohmann::json jz;
    jz["zone"] = u + 1;
    jz["active"] = nlohmann::json::array();
    jz["multiplicities"] = nlohmann::json::array();
    for (auto m : z.active) {
      jz["active"].push_back(m + 1);
      jz["multiplicities"].push_back(z.multiplicity[m]);
    }
    jz["users"] = nlohmann::json::array();
    for (const auto& usr : z.users)
      jz["users"].push_back({{"message", usr.message + 1}, {"x", usr.position.x}, {"y", usr.position.y}});
    j["zones"].push_back(std::move(jz));
  }
  j["global_multiplicity"] = sc.global_multiplicity;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario sc;
  sc.M = j.at("M").get<std::size_t>();
  sc.global_multiplicity.assign(sc.M, 0);
  for (const auto& jz : j.at("zones")) {
    ZoneActivity z;
    z.multiplicity.assign(sc.M, 0);
    const auto& act = jz.at("active");
    const auto& mul = jz.at("multiplicities");
    for (std::size_t i = 0; i < act.size(); ++i) {
      const auto m = act[i].get<std::size_t>() - 1;
      z.active.push_back(m);
      z.multiplicity[m] = mul[i].get<std::uint32_t>();
      sc.global_multiplicity[m] += z.multiplicity[m];
    }
    for (const auto& ju : jz.at("users"))
      z.users.push_back({ju.at("message").get<std::size_t>() - 1, {ju.at("x").get<double>(), ju.at("y").get<double>()}});
    sc.zones.push_back(std::move(z));
  }
  const double Ka = static_cast<double>(sc.total_users());
  sc.type.resize(sc.M);
  for (std::size_t m = 0; m < sc.M; ++m) sc.type[m] = Ka > 0 ? sc.global_multiplicity[m] / Ka : 0.0;
  return sc;
}

}  // namespace tuma
