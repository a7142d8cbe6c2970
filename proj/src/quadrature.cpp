#include "spiked/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "spiked/errors.hpp"

namespace spiked {

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw ConfigError("must be >= 1", "quad_nodes");
  // He_{k+1}(x) = x He_k(x) - k He_{k-1}(x): zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermite gh;
  gh.nodes.resize(static_cast<std::size_t>(n));
  gh.weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    gh.nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()(k);
    const double v0 = eig.eigenvectors()(0, k);
    gh.weights[static_cast<std::size_t>(k)] = v0 * v0;
  }
  // Symmetrize: the rule is exactly symmetric about 0.
  for (int k = 0; k < n / 2; ++k) {
    const auto a = static_cast<std::size_t>(k);
    const auto b = static_cast<std::size_t>(n - 1 - k);
    const double x = 0.5 * (gh.nodes[b] - gh.nodes[a]);
    const double w = 0.5 * (gh.weights[a] + gh.weights[b]);
    gh.nodes[a] = -x;
    gh.nodes[b] = x;
    gh.weights[a] = gh.weights[b] = w;
  }
  if (n % 2 == 1) gh.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  double total = 0.0;
  for (double w : gh.weights) total += w;
  for (double& w : gh.weights) w /= total;
  return gh;
}

}  // namespace spiked
