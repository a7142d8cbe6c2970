#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/prior.hpp"

namespace spiked {

struct SizeSpec {
  int n = 16;
  int m = 0;  // 0: resolved as round(alpha * n)
};

struct McmcSettings {
  int replicas = 4;
  int sweeps = 3000;
  int burn_in = 1000;
  int thinning = 10;
};

enum class Engine { Exact, Mcmc };

// Every experiment and CLI subcommand reads this document. All fields are
// optional; precedence is built-in defaults < config file < command-line flags.
struct ExperimentConfig {
  double alpha = 1.0;
  double beta = 0.6;
  PriorSpec prior_u{};
  PriorSpec prior_v{};
  std::vector<SizeSpec> sizes = {{16, 0}};
  int samples = 2000;  // per hypothesis (or instance draws for identity checks)
  std::uint64_t seed = 1;
  Engine engine = Engine::Exact;
  std::vector<double> s_grid = {0.5, 1.0, 2.0};
  McmcSettings mcmc{};
  int quad_nodes = 61;
  int threads = 0;  // 0: all cores
  std::string out = "runs";

  // Subcommand-specific fields.
  std::vector<double> alpha_grid = {0.5, 1.0, 2.0};  // phase-boundary
  double tol = 1e-6;                                  // phase-boundary
  int instances = 200;                                // overlaps, spectral-power
  int calibration = 1000;                             // spectral-power null draws
  double beta_above = 1.5;                            // spectral-power
  double beta_below = 0.5;                            // spectral-power
  double delta_beta = 0.01;                           // derivative-check
  std::string hypothesis = "spiked";                  // simulate, loglr
  std::string format = "csv";                         // simulate: csv | binary
  std::string input;                                  // loglr: instance header JSON
  std::uint64_t max_v_configs = std::uint64_t{1} << 24;

  // M for a size entry: explicit m, else round(alpha * n).
  int resolve_m(const SizeSpec& s) const;
  void validate() const;
  nlohmann::json to_json() const;
};

// Overlays the fields present in `j` onto `base`. Unknown fields are rejected.
ExperimentConfig merge_config(const ExperimentConfig& base, const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base = {});

// Field names with their default values, for --help output.
std::vector<std::pair<std::string, std::string>> config_field_defaults();

}  // namespace spiked
