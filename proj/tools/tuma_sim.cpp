// SPDX-License-Identifier: Apache-2.0
// tuma-sim: sweep runner and oracle tooling.
//
//   tuma-sim run --config full.cfg --decoder centralized --sweep snr --values -30,-20 \
//                --trials 50 --seed 1 --out results.csv
//   tuma-sim oracle grid-denoise --seed 3
//   tuma-sim oracle fd-jacobian --preset reduced --instances 20
//
// Exit codes: 0 ok, 2 config error, 3 more than 10% of trials aborted.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tuma/config.hpp"
#include "tuma/harness/experiment.hpp"
#include "tuma/harness/oracles.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAborts = 3;

struct ConfigArgs {
  std::string path;
  std::string preset = "full";
  std::vector<std::string> overrides;

  void attach(CLI::App& app) {
    app.add_option("--config", path, "key = value config file (overrides the preset)");
    app.add_option("--preset", preset, "base configuration when no file is given")
        ->check(CLI::IsMember({"full", "reduced"}));
    app.add_option("--set", overrides, "extra key=value overrides, applied last");
  }

  [[nodiscard]] tuma::SystemConfig build() const {
    tuma::SystemConfig cfg = preset == "reduced" ? tuma::reduced_config() : tuma::SystemConfig{};
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw tuma::ConfigError("cannot open config file '" + path + "'");
      cfg = tuma::parse_config(in, cfg);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw tuma::ConfigError("--set expects key=value, got '" + kv + "'");
      tuma::set_config_value(cfg, tuma::detail::trim(std::string_view(kv).substr(0, eq)),
                             tuma::detail::trim(std::string_view(kv).substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
  }
};

int run_command(const ConfigArgs& ca, const std::string& decoder, const std::string& sweep,
                const std::string& values, std::size_t trials, std::uint64_t seed, const std::string& out,
                const std::string& phi_max, bool timing, const std::string& records) {
  tuma::ExperimentSpec spec;
  spec.base = ca.build();
  spec.decoder = tuma::parse_decoder(decoder);
  spec.axis = tuma::parse_axis(sweep);
  spec.values = tuma::parse_sweep_values(values);
  spec.trials = trials;
  spec.seed = seed;
  spec.phi_max = tuma::parse_sweep_value(phi_max);
  spec.timing = timing;
  if (!(spec.phi_max >= 0.0)) throw tuma::ConfigError("--phi-max must be >= 0");

  const tuma::ExperimentResult res = tuma::run_experiment(spec);

  if (out == "-") {
    tuma::write_csv(std::cout, res);
  } else {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw tuma::ConfigError("cannot write '" + out + "'");
    tuma::write_csv(os, res);
  }
  if (!records.empty()) {
    std::ofstream js(records, std::ios::binary);
    if (!js) throw tuma::ConfigError("cannot write '" + records + "'");
    tuma::write_records_json(js, res);
  }
  if (res.excessive_aborts()) {
    std::cerr << "tuma-sim: more than 10% of trials aborted\n";
    return kExitAborts;
  }
  return 0;
}

int grid_denoise_command(std::uint64_t seed, std::size_t samples, std::size_t grid_res, double tau) {
  const tuma::QuadratureCheck q = tuma::quadrature_check(seed, samples, grid_res, tau);
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j = {{"seed", seed},
                      {"samples", samples},
                      {"grid_res", grid_res},
                      {"tau", tau},
                      {"mc_posterior", vec(q.mc_posterior)},
                      {"grid_posterior", vec(q.grid_posterior)},
                      {"max_rel_posterior", q.max_rel_posterior},
                      {"rel_xhat", q.max_rel_xhat}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int fd_jacobian_command(const ConfigArgs& ca, std::uint64_t seed, std::size_t instances, double tau, double h) {
  const tuma::SystemConfig cfg = ca.build();
  nlohmann::json arr = nlohmann::json::array();
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = tuma::derive_seed(seed, {i});
    const tuma::OnsagerCheck c = tuma::onsager_fd_check(cfg, s, tau, h);
    worst = std::max(worst, c.max_abs_error);
    arr.push_back({{"seed", s}, {"max_abs_error", c.max_abs_error}, {"max_abs_entry", c.max_abs_entry}});
  }
  std::cout << nlohmann::json{{"instances", arr}, {"max_abs_error", worst}}.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Type-based unsourced multiple access simulator"};
  app.require_subcommand(1);

  ConfigArgs run_cfg;
  std::string decoder, sweep = "snr", values, out, phi_max = "0", records;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  bool timing = false;
  CLI::App* run = app.add_subcommand("run", "run a seeded sweep and write a CSV");
  run_cfg.attach(*run);
  run->add_option("--decoder", decoder, "centralized | distributed | ampda")
      ->required()
      ->check(CLI::IsMember({"centralized", "distributed", "ampda"}));
  run->add_option("--sweep", sweep, "snr | m | phi | n")->check(CLI::IsMember({"snr", "m", "phi", "n"}));
  run->add_option("--values", values, "comma-separated sweep values (dB, log2 M, rad or N)")->required();
  run->add_option("--trials", trials, "trials per sweep point")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out, "CSV path, or - for stdout")->required();
  run->add_option("--phi-max", phi_max, "AMP-DA phase error bound when not sweeping phi (e.g. pi/8)");
  run->add_flag("--timing", timing, "fill mean_wall_ms (the CSV then varies between runs)");
  run->add_option("--records", records, "also write per-trial records as JSON");

  CLI::App* oracle = app.add_subcommand("oracle", "brute-force reference checks");
  oracle->require_subcommand(1);

  std::uint64_t g_seed = 0;
  std::size_t g_samples = 100000, g_res = 48;
  double g_tau = 1e-3;
  CLI::App* grid = oracle->add_subcommand("grid-denoise", "MC denoiser vs quadrature on a 1-zone, 1-AP toy");
  grid->add_option("--seed", g_seed);
  grid->add_option("--samples", g_samples)->check(CLI::PositiveNumber);
  grid->add_option("--grid-res", g_res)->check(CLI::PositiveNumber);
  grid->add_option("--tau", g_tau)->check(CLI::PositiveNumber);

  ConfigArgs fd_cfg;
  fd_cfg.preset = "reduced";
  std::uint64_t f_seed = 0;
  std::size_t f_instances = 20;
  double f_tau = 0.05, f_h = 1e-6;
  CLI::App* fd = oracle->add_subcommand("fd-jacobian", "analytic Onsager term vs finite differences");
  fd_cfg.attach(*fd);
  fd->add_option("--seed", f_seed);
  fd->add_option("--instances", f_instances)->check(CLI::PositiveNumber);
  fd->add_option("--tau", f_tau, "base effective noise variance")->check(CLI::PositiveNumber);
  fd->add_option("--step", f_h, "finite-difference step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_command(run_cfg, decoder, sweep, values, trials, seed, out, phi_max, timing, records);
    if (*grid) return grid_denoise_command(g_seed, g_samples, g_res, g_tau);
    if (*fd) return fd_jacobian_command(fd_cfg, f_seed, f_instances, f_tau, f_h);
  } catch (const tuma::ConfigError& e) {
    std::cerr << "tuma-sim: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "tuma-sim: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
