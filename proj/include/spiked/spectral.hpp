#pragma once

#include <cstdint>
#include <vector>

#include "spiked/model.hpp"

namespace spiked {

struct PowerIterationOptions {
  double tolerance = 1e-10;  // relative change of the Rayleigh quotient
  int max_iterations = 100000;
  // Fresh random starts tried when a run fails to converge or collapses to 0.
  int restarts = 2;
  std::uint64_t seed = 0x5eed;
  // When set, receives the Rayleigh quotient after every step of the last run.
  std::vector<double>* rayleigh_trace = nullptr;
};

// Largest eigenvalue of Y Y^T (equivalently the squared top singular value of
// Y) by power iteration on the smaller Gram matrix.
double top_singular_value_sq(const Matrix& y, const PowerIterationOptions& options = {});

enum class Decision { Null, Spiked };

struct SpectralStat {
  double top_sv_sq_over_n = 0.0;  // lambda_max(Y Y^T) / N
  double bulk_edge = 0.0;         // (1 + sqrt(alpha))^2
  Decision decision = Decision::Null;
  double margin = 0.0;  // top - (edge + buffer)
};

// decision = spiked iff lambda_max(Y Y^T)/N > (1 + sqrt(alpha))^2 + buffer.
SpectralStat spectral_detect(const Instance& instance, double alpha, double buffer);

}  // namespace spiked
