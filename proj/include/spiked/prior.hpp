#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/rng.hpp"

namespace spiked {

enum class PriorFamily { Rademacher, SparseRademacher, Custom, GaussianRsOnly };

// Parsed family descriptor, before standardization.
struct PriorSpec {
  PriorFamily family = PriorFamily::Rademacher;
  double rho = 1.0;              // sparse_rademacher only
  std::vector<double> atoms;     // custom only
  std::vector<double> weights;   // custom only; may be empty for two opposite-sign atoms
};

// Discrete, zero-mean, unit-variance law on finitely many atoms.
//
// The Gaussian family is a tagged placeholder with no atoms; it is accepted
// only by the replica-symmetric routines, which use its closed form.
class Prior {
 public:
  static Prior rademacher();
  static Prior sparse_rademacher(double rho);
  static Prior gaussian();

  std::span<const double> atoms() const noexcept { return atoms_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  PriorFamily family() const noexcept { return family_; }
  double rho() const noexcept { return rho_; }

  // max |atom|; +inf for the Gaussian placeholder.
  double support_radius() const noexcept { return radius_; }
  bool bounded() const noexcept { return family_ != PriorFamily::GaussianRsOnly; }
  // Law invariant under a -> -a.
  bool symmetric() const noexcept { return symmetric_; }

  // Throws ConfigError naming `context` for the Gaussian placeholder.
  void require_bounded(const std::string& context) const;

  std::string name() const;
  nlohmann::json to_json() const;

  // Filled on request by subgaussian_diagnostic(); never used in predictions.
  std::optional<double> subgaussian_diag;

 private:
  friend Prior standardize(std::vector<double> atoms, std::vector<double> weights);
  Prior() = default;
  void finalize();

  std::vector<double> atoms_;
  std::vector<double> weights_;
  PriorFamily family_ = PriorFamily::Custom;
  double rho_ = 1.0;
  double radius_ = 0.0;
  bool symmetric_ = false;
};

// Affine-normalizes a discrete law to mean 0, variance 1. Zero-weight atoms
// are dropped and equal atoms merged. Throws ConfigError on degenerate laws.
Prior standardize(std::vector<double> atoms, std::vector<double> weights);

Prior make_prior(const PriorSpec& spec);

// Accepts {"family": "rademacher" | "sparse_rademacher" | "custom" |
// "gaussian_rs_only", ...} or the shorthand strings "rademacher",
// "sparse_rademacher:0.04", "gaussian".
PriorSpec parse_prior_spec(const nlohmann::json& j);
PriorSpec parse_prior_spec(const std::string& text);
nlohmann::json to_json(const PriorSpec& spec);

std::vector<double> sample(const Prior& prior, std::size_t count, Rng& rng);

// Draw one atom index by inverse CDF.
std::size_t sample_index(const Prior& prior, Rng& rng);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double support_radius = 0.0;
  double fourth_moment = 0.0;
};

Moments moments(const Prior& prior);

// max over lambda in {0.1, 0.2, ..., 10} of sqrt(2 log E exp(lambda u) / lambda^2).
double subgaussian_diagnostic(const Prior& prior);

}  // namespace spiked
