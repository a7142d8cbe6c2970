#include "spiked/spectral.hpp"

#include <cmath>

#include "spiked/errors.hpp"
#include "spiked/rng.hpp"

namespace spiked {

namespace {

struct PowerResult {
  double value = 0.0;
  bool converged = false;
};

PowerResult power_iterate(const Eigen::MatrixXd& gram, Rng& rng, const PowerIterationOptions& opt) {
  const Eigen::Index n = gram.rows();
  if (opt.rayleigh_trace) opt.rayleigh_trace->clear();
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal();
  x.normalize();
  Eigen::VectorXd y = gram * x;
  double rq = x.dot(y);
  if (opt.rayleigh_trace) opt.rayleigh_trace->push_back(rq);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double norm = y.norm();
    if (norm == 0.0) return {0.0, true};
    x = y / norm;
    y.noalias() = gram * x;
    const double next = x.dot(y);
    if (opt.rayleigh_trace) opt.rayleigh_trace->push_back(next);
    const bool done = std::abs(next - rq) <= opt.tolerance * std::abs(next);
    rq = next;
    if (done) return {rq, true};
  }
  return {rq, false};
}

}  // namespace

double top_singular_value_sq(const Matrix& y, const PowerIterationOptions& options) {
  if (y.size() == 0) throw ConfigError("matrix is empty", "data");
  const Eigen::MatrixXd gram = y.rows() <= y.cols() ? Eigen::MatrixXd(y * y.transpose())
                                                    : Eigen::MatrixXd(y.transpose() * y);
  Rng rng(options.seed);
  const bool nonzero = gram.trace() > 0.0;
  double best = 0.0;
  for (int r = 0; r <= options.restarts; ++r) {
    const PowerResult res = power_iterate(gram, rng, options);
    best = std::max(best, res.value);
    if (res.converged && (res.value > 0.0 || !nonzero)) break;
  }
  return best;
}

SpectralStat spectral_detect(const Instance& instance, double alpha, double buffer) {
  if (!(buffer >= 0.0)) throw ConfigError("must be >= 0", "buffer");
  SpectralStat s;
  s.top_sv_sq_over_n = top_singular_value_sq(instance.data) / instance.n_rows();
  s.bulk_edge = (1.0 + std::sqrt(alpha)) * (1.0 + std::sqrt(alpha));
  s.margin = s.top_sv_sq_over_n - (s.bulk_edge + buffer);
  s.decision = s.margin > 0.0 ? Decision::Spiked : Decision::Null;
  return s;
}

}  // namespace spiked
