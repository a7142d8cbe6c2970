#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/prior.hpp"
#include "spiked/quadrature.hpp"

namespace spiked {

// psi(r) = E_{x*, z} log sum_k w_k exp(sqrt(r) z a_k + r a_k x* - r a_k^2 / 2)
// for x* drawn from the prior and z ~ N(0, 1). The z-expectation uses the
// Gauss-Hermite rule; the Gaussian prior uses (r - log(1 + r)) / 2.
double psi(const Prior& prior, double r, const GaussHermite& quad);

// Finite-difference derivative of psi: central with h = max(1e-5, 1e-5 r),
// second-order one-sided when r < h.
double psi_prime(const Prior& prior, double r, const GaussHermite& quad);

// F = psi_u(beta q_v) + alpha psi_v(beta q_u) - beta q_u q_v / 2.
double rs_potential(double alpha, double beta, double q_u, double q_v, const Prior& prior_u,
                    const Prior& prior_v, const GaussHermite& quad);

struct RsOptions {
  int quad_nodes = 61;
  int grid_points = 160;
  double damping = 0.5;
  int max_iterations = 10000;
  double fixed_point_tol = 1e-10;
  double agreement_tol = 1e-5;
};

struct StationaryPoint {
  double q_u = 0.0;
  double q_v = 0.0;
  double value = 0.0;
  double residual = 0.0;
  bool saddle = false;  // local inf in q_u and local sup of the inner infimum in q_v
};

enum class RsMethod { FixedPoint, Grid };

struct RsSolution {
  double q_u = 0.0;
  double q_v = 0.0;
  double phi_rs = 0.0;  // sup_{q_v} inf_{q_u} F
  RsMethod method = RsMethod::FixedPoint;
  int iterations = 0;
  // |q_u - 2 psi_u'(beta q_v)| + |q_v - 2 alpha psi_v'(beta q_u)| at the returned point.
  double residual = 0.0;
  double q_u_max = 0.0;  // search box
  double q_v_max = 0.0;
  std::vector<StationaryPoint> stationary_points;  // distinct fixed points found

  nlohmann::json to_json() const;
};

// Box for the overlaps: [0, K_u^2] x [0, alpha K_v^2], with [0, 10 (1 + alpha)]
// standing in for a Gaussian side.
std::pair<double, double> rs_box(double alpha, const Prior& prior_u, const Prior& prior_v);

RsSolution solve_rs(double alpha, double beta, const Prior& prior_u, const Prior& prior_v,
                    const RsOptions& options = {});

struct PhaseBoundary {
  std::vector<double> alpha_grid;
  std::vector<double> beta_star;       // NaN when unbounded in the bracket
  std::vector<double> phi_at_bracket;  // phi_RS at beta = 2 / sqrt(alpha)
  std::vector<bool> unbounded;
  double tolerance = 1e-6;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Per alpha, bisection in beta on (0, 2/sqrt(alpha)] for the first beta with
// phi_RS > tol.
PhaseBoundary phase_boundary(const std::vector<double>& alpha_grid, const Prior& prior_u,
                             const Prior& prior_v, double tol = 1e-6, const RsOptions& options = {},
                             int threads = 1, double beta_tol = 1e-4);

}  // namespace spiked
