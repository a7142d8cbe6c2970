#include "spiked/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spiked/errors.hpp"

namespace spiked {

namespace {

double strength(double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("alpha and beta must be nonnegative", alpha >= 0.0 ? "beta" : "alpha");
  }
  return alpha * beta * beta;
}

double checked_log1m(double alpha, double beta) {
  const double ab2 = strength(alpha, beta);
  if (!(ab2 < 1.0)) {
    throw ConfigError("prediction requires alpha*beta^2 < 1 (got " + std::to_string(ab2) + ")",
                      "beta");
  }
  return std::log1p(-ab2);
}

}  // namespace

LrAsymptotics lr_asymptotics(double alpha, double beta) {
  LrAsymptotics out;
  const double ab2 = alpha * beta * beta;
  if (!(alpha >= 0.0 && beta >= 0.0 && ab2 < 1.0)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.mean_null = out.mean_alt = out.variance = nan;
    out.valid = false;
    return out;
  }
  const double l = std::log1p(-ab2);
  out.mean_null = 0.25 * l;
  out.mean_alt = -out.mean_null;
  out.variance = -0.5 * l;
  out.valid = true;
  return out;
}

double optimal_error(double alpha, double beta) {
  return erfc(0.25 * std::sqrt(-checked_log1m(alpha, beta)));
}

double kl_limit(double alpha, double beta) { return -0.25 * checked_log1m(alpha, beta); }

double theta(double alpha, double beta) {
  checked_log1m(alpha, beta);
  return alpha * beta / (1.0 - alpha * beta * beta);
}

std::complex<double> char_fn(double s, double alpha, double beta, Hypothesis hypothesis) {
  const double l = checked_log1m(alpha, beta);
  const double mean = hypothesis == Hypothesis::Null ? 0.25 * l : -0.25 * l;
  const double var = -0.5 * l;
  return std::exp(std::complex<double>(-0.5 * var * s * s, s * mean));
}

double erfc(double x) { return std::erfc(x); }

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

EcdfSummary summarize(std::span<const double> samples, double ref_mean, double ref_variance) {
  if (samples.size() < 2) throw ConfigError("need at least two samples", "samples");
  if (!(ref_variance >= 0.0)) throw ConfigError("reference variance must be >= 0", "variance");
  EcdfSummary s;
  s.n = samples.size();
  const double n = static_cast<double>(s.n);
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  s.mean = mean;
  s.variance = m2 / (n - 1.0);
  s.se_mean = std::sqrt(s.variance / n);
  const double mu2 = m2 / n, mu4 = m4 / n;
  s.se_variance = std::sqrt(std::max(0.0, (mu4 - (n - 3.0) / (n - 1.0) * mu2 * mu2) / n));

  s.sorted.assign(samples.begin(), samples.end());
  std::sort(s.sorted.begin(), s.sorted.end());
  s.ref_mean = ref_mean;
  s.ref_variance = ref_variance;
  s.degenerate_reference = ref_variance == 0.0;
  if (s.degenerate_reference) {
    s.ks_distance = ks_distance_sorted(s.sorted, [&](double x) { return x >= ref_mean ? 1.0 : 0.0; });
  } else {
    const double sd = std::sqrt(ref_variance);
    s.ks_distance = ks_distance_sorted(s.sorted, [&](double x) { return normal_cdf(x, ref_mean, sd); });
  }
  return s;
}

}  // namespace spiked
