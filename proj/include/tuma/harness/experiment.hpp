// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tuma/amp/centralized.hpp"
#include "tuma/amp/distributed.hpp"
#include "tuma/baseline/ampda.hpp"
#include "tuma/channel.hpp"
#include "tuma/config.hpp"
#include "tuma/harness/stats.hpp"
#include "tuma/model.hpp"
#include "tuma/rng.hpp"
#include "tuma/source.hpp"

namespace tuma {

enum class Decoder { centralized, distributed, ampda };
enum class SweepAxis { snr, log2_m, phi, n };

inline Decoder parse_decoder(const std::string& s) {
  if (s == "centralized") return Decoder::centralized;
  if (s == "distributed") return Decoder::distributed;
  if (s == "ampda") return Decoder::ampda;
  throw ConfigError("unknown decoder '" + s + "'");
}

inline const char* to_string(Decoder d) {
  switch (d) {
    case Decoder::centralized: return "centralized";
    case Decoder::distributed: return "distributed";
    case Decoder::ampda: return "ampda";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "snr") return SweepAxis::snr;
  if (s == "m") return SweepAxis::log2_m;
  if (s == "phi") return SweepAxis::phi;
  if (s == "n") return SweepAxis::n;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

/// One sweep value: a plain number or a multiple of pi ("pi", "pi/4",
/// "3*pi/8", "2pi").
inline double parse_sweep_value(std::string_view text) {
  text = detail::trim(text);
  const auto pos = text.find("pi");
  if (pos == std::string_view::npos) return detail::parse_number<double>("sweep value", text);
  double num = 1.0, den = 1.0;
  std::string_view head = detail::trim(text.substr(0, pos));
  if (!head.empty() && head.back() == '*') head = detail::trim(head.substr(0, head.size() - 1));
  if (!head.empty()) num = detail::parse_number<double>("sweep value", head);
  std::string_view tail = detail::trim(text.substr(pos + 2));
  if (!tail.empty()) {
    if (tail.front() != '/') throw ConfigError("sweep value '" + std::string(text) + "': expected pi/<number>");
    den = detail::parse_number<double>("sweep value", detail::trim(tail.substr(1)));
    if (den == 0.0) throw ConfigError("sweep value '" + std::string(text) + "': division by zero");
  }
  return num * std::numbers::pi / den;
}

/// Comma-separated list of sweep values.
inline std::vector<double> parse_sweep_values(std::string_view text) {
  std::vector<double> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_sweep_value(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

struct ExperimentSpec {
  SystemConfig base;
  SweepAxis axis = SweepAxis::snr;
  std::vector<double> values;
  Decoder decoder = Decoder::centralized;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  double phi_max = 0.0;  // AMP-DA phase error when the sweep is not over phi
  bool timing = false;   // fill mean_wall_ms (makes the CSV run-dependent)

  void validate() const {
    if (trials < 1) throw ConfigError("trial count must be >= 1");
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    if (axis == SweepAxis::phi && decoder != Decoder::ampda) throw ConfigError("a phi sweep needs --decoder ampda");
  }
};

namespace detail {
inline std::string format_limit(double v) { return std::to_string(static_cast<long long>(v)); }
}  // namespace detail

/// Configuration for sweep point `value` (a phi sweep leaves it unchanged).
inline SystemConfig apply_sweep(SystemConfig cfg, SweepAxis axis, double value) {
  auto whole = [&](const char* what, double max) {
    if (!(value >= 1.0) || value != std::floor(value) || value > max)
      throw ConfigError(std::string(what) + " sweep values must be integers in [1, " + detail::format_limit(max) + "]");
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::snr: cfg.snr_rx_db = value; break;
    case SweepAxis::log2_m: cfg.M = std::size_t{1} << whole("log2 M", 30.0); break;
    case SweepAxis::n: cfg.N = whole("N", 1e9); break;
    case SweepAxis::phi:
      if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("phi_max values must be finite and >= 0");
      break;
  }
  cfg.validate();
  return cfg;
}

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double sweep_value = 0.0;
  double tv = 0.0;
  bool decode_failure = false;
  bool aborted = false;
  double wall_ms = 0.0;
  std::size_t iterations = 0;
  std::size_t underflows = 0;
  double final_tau_mean = 0.0;
  std::uint64_t fronthaul_bytes = 0;
  std::size_t failed_aps = 0;
  std::string abort_reason;
};

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t sweep_index, std::size_t trial) {
  return derive_seed(master, {sweep_index, trial});
}

/// One trial. Sub-streams: scenario, codebook, then fading / noise / samples
/// for the cell-free decoders or phases / noise for AMP-DA.
inline TrialRecord run_trial(const SystemConfig& cfg, const Topology& topo, Decoder decoder, double phi_max,
                             std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.seed = seed;

  Rng scen_rng = make_stream(seed, Stream::scenario);
  const Scenario sc = sample_scenario(cfg, topo, scen_rng);
  Rng cb_rng = make_stream(seed, Stream::codebook);
  const Codebook cb = generate_codebook(cfg, cb_rng);
  Rng noise_rng = make_stream(seed, Stream::noise);

  const TypeEstimate* est = nullptr;
  const AmpDiagnostics* diag = nullptr;
  DecodeResult dec;
  DistributedResult dist;
  AmpdaResult amp;
  if (decoder == Decoder::ampda) {
    Rng phase_rng = make_stream(seed, Stream::phases);
    amp = simulate_ampda(sc, cb, cfg, topo, phi_max, phase_rng, noise_rng);
    est = &amp.estimate;
    diag = &amp.diag;
  } else {
    const LsfcProfile lsfc(topo, cfg);
    Rng fade_rng = make_stream(seed, Stream::fading);
    const auto X = effective_channels(sc, sample_channels(sc, lsfc, cfg.A, fade_rng), topo.F());
    const ReceivedSignal rx = received_signal(cb, X, noise_variance(cfg, topo), cfg.NP, noise_rng);
    Rng sample_rng = make_stream(seed, Stream::samples);
    if (decoder == Decoder::centralized) {
      dec = run_centralized(rx.Y, cb, topo, cfg, sample_rng);
      est = &dec.estimate;
      diag = &dec.diag;
    } else {
      dist = run_distributed(rx.Y, cb, topo, cfg, sample_rng);
      est = &dist.decode.estimate;
      diag = &dist.decode.diag;
      rec.fronthaul_bytes = dist.fronthaul_bytes;
      rec.failed_aps = dist.failed_aps.size();
    }
  }

  rec.aborted = diag->aborted;
  rec.abort_reason = diag->abort_reason;
  rec.iterations = diag->iterations;
  rec.underflows = diag->underflows;
  if (!diag->tau_history.empty()) rec.final_tau_mean = diag->final_tau().mean();
  rec.decode_failure = est->decode_failure;
  rec.tv = rec.aborted ? std::numeric_limits<double>::quiet_NaN() : tv_distance(sc.type, est->type);
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

struct SweepRow {
  double sweep_value = 0.0;
  std::size_t trials = 0;
  SummaryStats tv;  // over trials that did not abort
  double failure_rate = 0.0;  // decode failures plus aborts, over all trials
  double abort_rate = 0.0;
  double mean_wall_ms = 0.0;
};

struct ExperimentResult {
  std::vector<SweepRow> rows;
  std::vector<TrialRecord> records;  // sweep-major, trial order
  bool timing = false;

  /// More than 10% of all trials aborted.
  [[nodiscard]] bool excessive_aborts() const {
    std::size_t aborted = 0;
    for (const auto& r : records) aborted += r.aborted ? 1 : 0;
    return !records.empty() && 10 * aborted > records.size();
  }
};

/// Worker count: TUMA_THREADS when set, otherwise the hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("TUMA_THREADS"); env != nullptr && *env != '\0') {
    const auto n = detail::parse_number<std::size_t>("TUMA_THREADS", detail::trim(env));
    if (n == 0) throw ConfigError("TUMA_THREADS must be >= 1");
    return n;
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs `count` independent jobs on up to `threads` workers. Each job writes
/// only its own slot, so results do not depend on scheduling.
template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, Job&& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          const std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline SweepRow summarize_point(double value, const std::vector<TrialRecord>& recs) {
  SweepRow row;
  row.sweep_value = value;
  row.trials = recs.size();
  std::vector<double> tv;
  std::size_t fails = 0, aborts = 0;
  double wall = 0.0;
  for (const auto& r : recs) {
    if (!r.aborted) tv.push_back(r.tv);
    fails += (r.decode_failure || r.aborted) ? 1 : 0;
    aborts += r.aborted ? 1 : 0;
    wall += r.wall_ms;
  }
  row.tv = summarize(tv);
  const auto n = static_cast<double>(recs.size());
  row.failure_rate = static_cast<double>(fails) / n;
  row.abort_rate = static_cast<double>(aborts) / n;
  row.mean_wall_ms = wall / n;
  return row;
}

/// Trial i of sweep point s uses seed trial_seed(spec.seed, s, i).
inline ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t threads = worker_count()) {
  spec.validate();
  std::vector<SystemConfig> cfgs;
  std::vector<Topology> topos;
  for (double v : spec.values) {
    cfgs.push_back(apply_sweep(spec.base, spec.axis, v));
    topos.push_back(build_grid_topology(cfgs.back()));
    noise_variance(cfgs.back(), topos.back());  // surfaces SNR / geometry errors before any work
  }
  const std::size_t P = spec.values.size();
  ExperimentResult res;
  res.timing = spec.timing;
  res.records.resize(P * spec.trials);
  parallel_for(res.records.size(), threads, [&](std::size_t job) {
    const std::size_t s = job / spec.trials;
    const std::size_t i = job % spec.trials;
    const double phi = spec.axis == SweepAxis::phi ? spec.values[s] : spec.phi_max;
    TrialRecord rec = run_trial(cfgs[s], topos[s], spec.decoder, phi, trial_seed(spec.seed, s, i));
    rec.trial = i;
    rec.sweep_value = spec.values[s];
    res.records[job] = std::move(rec);
  });
  for (std::size_t s = 0; s < P; ++s) {
    const std::vector<TrialRecord> point(res.records.begin() + static_cast<std::ptrdiff_t>(s * spec.trials),
                                         res.records.begin() + static_cast<std::ptrdiff_t>((s + 1) * spec.trials));
    res.rows.push_back(summarize_point(spec.values[s], point));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader =
    "sweep_value,trials,mean_tv,std_tv,ci95_lo,ci95_hi,failure_rate,mean_wall_ms";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// mean_wall_ms is "NA" unless the experiment ran with timing enabled, so the
/// file is a pure function of the spec by default.
inline void write_csv(std::ostream& os, const ExperimentResult& res) {
  os << kCsvHeader << '\n';
  for (const auto& r : res.rows) {
    os << format_number(r.sweep_value) << ',' << r.trials << ',' << format_number(r.tv.mean) << ','
       << format_number(r.tv.std_dev) << ',' << format_number(r.tv.ci95_lo) << ',' << format_number(r.tv.ci95_hi)
       << ',' << format_number(r.failure_rate) << ','
       << (res.timing ? format_number(r.mean_wall_ms) : std::string("NA")) << '\n';
  }
}

inline nlohmann::json to_json(const TrialRecord& r, bool timing) {
  nlohmann::json j = {{"trial", r.trial + 1},
                      {"seed", r.seed},
                      {"sweep_value", r.sweep_value},
                      {"tv", r.aborted ? nlohmann::json(nullptr) : nlohmann::json(r.tv)},
                      {"decode_failure", r.decode_failure},
                      {"aborted", r.aborted},
                      {"iterations", r.iterations},
                      {"underflows", r.underflows},
                      {"final_tau_mean", r.final_tau_mean},
                      {"fronthaul_bytes", r.fronthaul_bytes},
                      {"failed_aps", r.failed_aps}};
  if (r.aborted) j["abort_reason"] = r.abort_reason;
  j["wall_ms"] = timing ? nlohmann::json(r.wall_ms) : nlohmann::json(nullptr);
  return j;
}

inline void write_records_json(std::ostream& os, const ExperimentResult& res) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : res.records) arr.push_back(to_json(r, res.timing));
  os << arr.dump(2) << '\n';
}

}  // namespace tuma
