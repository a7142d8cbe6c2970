#pragma once

#include <vector>

namespace spiked {

// Gauss-Hermite rule for the standard normal weight:
//   E f(z) ~= sum_k weights[k] * f(nodes[k]),  z ~ N(0, 1).
// Exact for polynomials of degree <= 2n - 1. Built by Golub-Welsch from the
// Jacobi matrix of the probabilists' Hermite recurrence.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermite gauss_hermite(int n);

}  // namespace spiked
