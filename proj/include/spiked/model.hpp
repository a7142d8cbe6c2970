#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "spiked/prior.hpp"
#include "spiked/rng.hpp"

namespace spiked {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelParams {
  int n_rows = 1;  // N
  int n_cols = 1;  // M
  double beta = 0.0;

  double alpha() const noexcept { return static_cast<double>(n_cols) / n_rows; }
  void validate() const;
};

enum class Hypothesis { Null, Spiked };

std::string to_string(Hypothesis h);
Hypothesis parse_hypothesis(const std::string& s);

struct Planted {
  std::vector<double> u;  // length N
  std::vector<double> v;  // length M
};

// One observation Y (N x M). `planted` is present iff hypothesis == Spiked.
struct Instance {
  Matrix data;
  std::optional<Planted> planted;
  Hypothesis hypothesis = Hypothesis::Null;
  double beta = 0.0;
  std::uint64_t seed = 0;

  int n_rows() const noexcept { return static_cast<int>(data.rows()); }
  int n_cols() const noexcept { return static_cast<int>(data.cols()); }
  double alpha() const noexcept { return static_cast<double>(data.cols()) / data.rows(); }
};

// Noise and planted factors drawn separately, so that the same draw can be
// assembled at several signal strengths (common random numbers).
struct SpikeDraw {
  Matrix noise;
  Planted planted;
};

// Draws W first, then u*, then v* from `rng`. The noise prefix of the stream
// is identical to the one consumed by generate_null().
SpikeDraw draw_spike(const ModelParams& params, const Prior& prior_u, const Prior& prior_v,
                     Rng& rng);

// Y = sqrt(beta/N) u* v*^T + W.
Instance assemble(const SpikeDraw& draw, double beta, std::uint64_t seed = 0);

Instance generate_null(const ModelParams& params, Rng& rng, std::uint64_t seed = 0);
Instance generate_spiked(const ModelParams& params, const Prior& prior_u, const Prior& prior_v,
                         Rng& rng, std::uint64_t seed = 0);

// Seeded conveniences: the instance records `seed`.
Instance generate(const ModelParams& params, Hypothesis h, const Prior& prior_u,
                  const Prior& prior_v, std::uint64_t seed);

// -H(u, v) = sqrt(beta/N) u^T Y v - (beta / 2N) |u|^2 |v|^2.
double hamiltonian(const Instance& instance, double beta, std::span<const double> u,
                   std::span<const double> v);

enum class MatrixFormat { Csv, Binary };

// Writes `<stem>.json` (header) and `<stem>.csv` or `<stem>.bin` (little-endian
// float64, row-major). Both formats round-trip exactly.
void write_instance(const Instance& instance, const std::filesystem::path& stem,
                    MatrixFormat format);
Instance read_instance(const std::filesystem::path& header_json);

nlohmann::json instance_header(const Instance& instance);

}  // namespace spiked
