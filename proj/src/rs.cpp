#include "spiked/rs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spiked/errors.hpp"
#include "spiked/parallel.hpp"

namespace spiked {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGolden = 0.6180339887498949;

double gaussian_psi(double r) { return 0.5 * (r - std::log1p(r)); }

// Evaluates F, the inner infimum over q_u and the outer objective
// G(q_v) = inf_{q_u} F(q_u, q_v) for one (alpha, beta).
class RsProblem {
 public:
  RsProblem(double alpha, double beta, const Prior& pu, const Prior& pv, const GaussHermite& quad)
      : alpha_(alpha), beta_(beta), pu_(pu), pv_(pv), quad_(quad) {
    std::tie(bu_, bv_) = rs_box(alpha, pu, pv);
  }

  double bu() const { return bu_; }
  double bv() const { return bv_; }

  double f(double qu, double qv) const {
    return psi(pu_, beta_ * qv, quad_) + alpha_ * psi(pv_, beta_ * qu, quad_) -
           0.5 * beta_ * qu * qv;
  }
  double map_u(double qv) const { return 2.0 * psi_prime(pu_, beta_ * qv, quad_); }
  double map_v(double qu) const { return 2.0 * alpha_ * psi_prime(pv_, beta_ * qu, quad_); }
  double residual(double qu, double qv) const {
    return std::abs(qu - map_u(qv)) + std::abs(qv - map_v(qu));
  }

  // argmin over q_u in [0, bu] of F(., q_v). F is convex in q_u (psi_v' is
  // nondecreasing), so the minimizer solves map_v(q_u) = q_v or sits on the box.
  double inner(double qv) const {
    if (qv <= 0.0) return 0.0;
    if (map_v(bu_) - qv <= 0.0) return bu_;
    double lo = 0.0, hi = bu_;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, bu_); ++it) {
      const double mid = 0.5 * (lo + hi);
      (map_v(mid) - qv < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double g(double qv) const { return f(inner(qv), qv); }
  // Proportional to dG/dq_v by the envelope theorem.
  double d(double qv) const { return map_u(qv) - inner(qv); }

 private:
  double alpha_, beta_;
  const Prior& pu_;
  const Prior& pv_;
  const GaussHermite& quad_;
  double bu_ = 0.0, bv_ = 0.0;
};

struct Candidate {
  double qu, qv, value;
};

// Local maxima of G on a grid over [0, bv] (quadratic spacing), refined.
Candidate grid_search(const RsProblem& pb, int points) {
  std::vector<double> qs(static_cast<std::size_t>(points) + 1), gs(qs.size());
  for (std::size_t k = 0; k < qs.size(); ++k) {
    const double t = static_cast<double>(k) / points;
    qs[k] = pb.bv() * t * t;
    gs[k] = pb.g(qs[k]);
  }
  Candidate best{0.0, 0.0, gs[0]};
  for (std::size_t k = 1; k < qs.size(); ++k) {
    const bool left_ok = gs[k] >= gs[k - 1];
    const bool right_ok = k + 1 == qs.size() || gs[k] >= gs[k + 1];
    if (!left_ok || !right_ok) continue;
    double lo = qs[k - 1], hi = k + 1 < qs.size() ? qs[k + 1] : qs[k];
    double qv;
    if (k + 1 < qs.size() && pb.d(lo) > 0.0 && pb.d(hi) < 0.0) {
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, pb.bv()); ++it) {
        const double mid = 0.5 * (lo + hi);
        (pb.d(mid) > 0.0 ? lo : hi) = mid;
      }
      qv = 0.5 * (lo + hi);
    } else {
      double a = lo, b = hi;
      double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
      double g1 = pb.g(x1), g2 = pb.g(x2);
      for (int it = 0; it < 100 && b - a > 1e-14 * std::max(1.0, pb.bv()); ++it) {
        if (g1 < g2) {
          a = x1;
          x1 = x2;
          g1 = g2;
          x2 = a + kGolden * (b - a);
          g2 = pb.g(x2);
        } else {
          b = x2;
          x2 = x1;
          g2 = g1;
          x1 = b - kGolden * (b - a);
          g1 = pb.g(x1);
        }
      }
      qv = 0.5 * (a + b);
      if (pb.g(qs[k]) > pb.g(qv)) qv = qs[k];
    }
    const double qu = pb.inner(qv);
    const double val = pb.f(qu, qv);
    if (val > best.value) best = {qu, qv, val};
  }
  return best;
}

bool is_saddle(const RsProblem& pb, double qu, double qv) {
  const double base = pb.f(qu, qv);
  const double eps = 1e-12 * std::max(1.0, std::abs(base));
  const double du = 1e-3 * std::max(1.0, pb.bu());
  const double dv = 1e-3 * std::max(1.0, pb.bv());
  if (pb.f(qu + du, qv) < base - eps) return false;
  if (qu - du >= 0.0 && pb.f(qu - du, qv) < base - eps) return false;
  const double g0 = pb.g(qv);
  if (pb.g(qv + dv) > g0 + eps) return false;
  if (qv - dv >= 0.0 && pb.g(qv - dv) > g0 + eps) return false;
  return true;
}

}  // namespace

double psi(const Prior& prior, double r, const GaussHermite& quad) {
  if (!(r >= 0.0)) throw ConfigError("psi needs r >= 0", "r");
  if (r == 0.0) return 0.0;
  if (!prior.bounded()) return gaussian_psi(r);
  const auto a = prior.atoms();
  const auto w = prior.weights();
  const double sr = std::sqrt(r);
  std::vector<double> lw(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) lw[k] = std::log(w[k]) - 0.5 * r * a[k] * a[k];
  std::vector<double> e(a.size());
  double total = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    double inner = 0.0;
    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
      const double h = sr * quad.nodes[q] + r * a[s];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < a.size(); ++k) {
        e[k] = lw[k] + h * a[k];
        mx = std::max(mx, e[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) sum += std::exp(e[k] - mx);
      inner += quad.weights[q] * (mx + std::log(sum));
    }
    total += w[s] * inner;
  }
  return total;
}

double psi_prime(const Prior& prior, double r, const GaussHermite& quad) {
  if (!(r >= 0.0)) throw ConfigError("psi_prime needs r >= 0", "r");
  const double h = std::max(1e-5, 1e-5 * r);
  if (r < h) {
    return (-3.0 * psi(prior, r, quad) + 4.0 * psi(prior, r + h, quad) -
            psi(prior, r + 2.0 * h, quad)) /
           (2.0 * h);
  }
  return (psi(prior, r + h, quad) - psi(prior, r - h, quad)) / (2.0 * h);
}

double rs_potential(double alpha, double beta, double q_u, double q_v, const Prior& prior_u,
                    const Prior& prior_v, const GaussHermite& quad) {
  if (!(q_u >= 0.0) || !(q_v >= 0.0)) throw ConfigError("overlaps must be >= 0", "q");
  return psi(prior_u, beta * q_v, quad) + alpha * psi(prior_v, beta * q_u, quad) -
         0.5 * beta * q_u * q_v;
}

std::pair<double, double> rs_box(double alpha, const Prior& prior_u, const Prior& prior_v) {
  const double open = 10.0 * (1.0 + alpha);
  const double bu = prior_u.bounded() ? prior_u.support_radius() * prior_u.support_radius() : open;
  const double bv =
      prior_v.bounded() ? alpha * prior_v.support_radius() * prior_v.support_radius() : open;
  return {bu, bv};
}

nlohmann::json RsSolution::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : stationary_points) {
    pts.push_back({{"q_u", p.q_u}, {"q_v", p.q_v}, {"value", p.value}, {"residual", p.residual},
                   {"saddle", p.saddle}});
  }
  return {{"q_u", q_u},
          {"q_v", q_v},
          {"phi_rs", phi_rs},
          {"method", method == RsMethod::FixedPoint ? "fixed_point" : "grid"},
          {"iterations", iterations},
          {"residual", residual},
          {"box", {q_u_max, q_v_max}},
          {"stationary_points", pts}};
}

RsSolution solve_rs(double alpha, double beta, const Prior& prior_u, const Prior& prior_v,
                    const RsOptions& options) {
  if (!(alpha > 0.0)) throw ConfigError("must be > 0", "alpha");
  if (!(beta >= 0.0)) throw ConfigError("must be >= 0", "beta");
  const GaussHermite quad = gauss_hermite(options.quad_nodes);
  const RsProblem pb(alpha, beta, prior_u, prior_v, quad);

  RsSolution sol;
  sol.q_u_max = pb.bu();
  sol.q_v_max = pb.bv();
  if (beta == 0.0) {
    sol.stationary_points.push_back({0.0, 0.0, 0.0, 0.0, true});
    return sol;
  }

  // Damped fixed-point iteration of the stationarity system from several starts.
  const std::vector<std::pair<double, double>> starts = {
      {0.0, 0.0}, {pb.bu(), pb.bv()}, {pb.bu(), 0.0}, {0.0, pb.bv()}, {0.5 * pb.bu(), 0.5 * pb.bv()}};
  const double d = options.damping;
  for (const auto& [qu0, qv0] : starts) {
    double qu = qu0, qv = qv0;
    bool converged = false, escaped = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
      const double tu = pb.map_u(qv);
      const double tv = pb.map_v(qu);
      if (std::abs(qu - tu) + std::abs(qv - tv) < options.fixed_point_tol) {
        converged = true;
        break;
      }
      qu = (1.0 - d) * qu + d * tu;
      qv = (1.0 - d) * qv + d * tv;
      if (qu > pb.bu() || qv > pb.bv()) {
        escaped = true;
        break;
      }
      qu = std::max(qu, 0.0);
      qv = std::max(qv, 0.0);
    }
    sol.iterations += it;
    if (!converged || escaped) continue;
    const bool dup = std::any_of(sol.stationary_points.begin(), sol.stationary_points.end(),
                                 [&](const StationaryPoint& p) {
                                   return std::abs(p.q_u - qu) < 1e-6 * std::max(1.0, pb.bu()) &&
                                          std::abs(p.q_v - qv) < 1e-6 * std::max(1.0, pb.bv());
                                 });
    if (dup) continue;
    sol.stationary_points.push_back(
        {qu, qv, pb.f(qu, qv), pb.residual(qu, qv), is_saddle(pb, qu, qv)});
  }

  const Candidate grid = grid_search(pb, options.grid_points);
  const StationaryPoint* best_fp = nullptr;
  for (const auto& p : sol.stationary_points) {
    if (p.saddle && (!best_fp || p.value > best_fp->value)) best_fp = &p;
  }

  if (best_fp && best_fp->value >= grid.value - options.agreement_tol) {
    sol.method = RsMethod::FixedPoint;
    sol.q_u = best_fp->q_u;
    sol.q_v = best_fp->q_v;
    sol.phi_rs = std::max(best_fp->value, grid.value);
    sol.residual = best_fp->residual;
    return sol;
  }

  const Candidate fine = grid_search(pb, 2 * options.grid_points);
  if (std::abs(fine.value - grid.value) > options.agreement_tol) {
    throw NumericalError("replica-symmetric grid search is inconsistent across resolutions at alpha=" +
                         std::to_string(alpha) + ", beta=" + std::to_string(beta));
  }
  const Candidate& best = fine.value >= grid.value ? fine : grid;
  sol.method = RsMethod::Grid;
  sol.q_u = best.qu;
  sol.q_v = best.qv;
  sol.phi_rs = best.value;
  sol.residual = pb.residual(best.qu, best.qv);
  return sol;
}

std::string PhaseBoundary::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "alpha,beta_star,phi_at_bracket,alpha_beta_star_sq\n";
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    out << alpha_grid[k] << ',';
    if (unbounded[k]) {
      out << "nan," << phi_at_bracket[k] << ",nan\n";
    } else {
      out << beta_star[k] << ',' << phi_at_bracket[k] << ','
          << alpha_grid[k] * beta_star[k] * beta_star[k] << '\n';
    }
  }
  return out.str();
}

nlohmann::json PhaseBoundary::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    nlohmann::json r{{"alpha", alpha_grid[k]},
                     {"phi_at_bracket", phi_at_bracket[k]},
                     {"unbounded_in_bracket", static_cast<bool>(unbounded[k])}};
    if (!unbounded[k]) {
      r["beta_star"] = beta_star[k];
      r["alpha_beta_star_sq"] = alpha_grid[k] * beta_star[k] * beta_star[k];
    }
    rows.push_back(r);
  }
  return {{"tolerance", tolerance}, {"points", rows}};
}

PhaseBoundary phase_boundary(const std::vector<double>& alpha_grid, const Prior& prior_u,
                             const Prior& prior_v, double tol, const RsOptions& options,
                             int threads, double beta_tol) {
  PhaseBoundary pb;
  pb.alpha_grid = alpha_grid;
  pb.tolerance = tol;
  pb.beta_star.assign(alpha_grid.size(), kNaN);
  pb.phi_at_bracket.assign(alpha_grid.size(), kNaN);
  std::vector<char> unbounded(alpha_grid.size(), 0);
  for (double a : alpha_grid) {
    if (!(a > 0.0)) throw ConfigError("alpha grid must be positive", "alpha_grid");
  }

  parallel_for(alpha_grid.size(), threads, [&](std::size_t k) {
    const double alpha = alpha_grid[k];
    auto above = [&](double beta) { return solve_rs(alpha, beta, prior_u, prior_v, options).phi_rs > tol; };
    double hi = 2.0 / std::sqrt(alpha);
    pb.phi_at_bracket[k] = solve_rs(alpha, hi, prior_u, prior_v, options).phi_rs;
    if (!(pb.phi_at_bracket[k] > tol)) {
      unbounded[k] = 1;
      return;
    }
    double lo = 0.0;
    while (hi - lo > beta_tol) {
      const double mid = 0.5 * (lo + hi);
      (above(mid) ? hi : lo) = mid;
    }
    pb.beta_star[k] = 0.5 * (lo + hi);
  });
  pb.unbounded.assign(unbounded.begin(), unbounded.end());
  return pb;
}

}  // namespace spiked
