#pragma once

#include <complex>
#include <span>
#include <vector>

#include "spiked/model.hpp"

namespace spiked {

// Limiting law of log L: N(mean_null, variance) under P_0 and
// N(mean_alt, variance) under P_beta, for alpha*beta^2 < 1.
struct LrAsymptotics {
  double mean_null = 0.0;  // +1/4 log(1 - alpha beta^2)
  double mean_alt = 0.0;   // -1/4 log(1 - alpha beta^2)
  double variance = 0.0;   // -1/2 log(1 - alpha beta^2)
  bool valid = false;      // values are NaN when false
};

// Never throws: outside alpha*beta^2 < 1 the result is flagged invalid.
LrAsymptotics lr_asymptotics(double alpha, double beta);

// The scalar predictors below throw ConfigError when alpha*beta^2 >= 1.
double optimal_error(double alpha, double beta);  // erfc(sqrt(-log(1 - a b^2)) / 4)
double kl_limit(double alpha, double beta);       // -1/4 log(1 - a b^2)
double theta(double alpha, double beta);          // a b / (1 - a b^2)
std::complex<double> char_fn(double s, double alpha, double beta, Hypothesis hypothesis);

double erfc(double x);
double normal_cdf(double x, double mean, double sd);

struct EcdfSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se_mean = 0.0;
  double se_variance = 0.0;  // from the fourth central moment
  std::vector<double> sorted;  // ECDF support; ECDF(sorted[i]) = (i+1)/n
  double ref_mean = 0.0;
  double ref_variance = 0.0;
  double ks_distance = 0.0;
  bool degenerate_reference = false;  // ref_variance == 0: point-mass reference
};

// Throws ConfigError for fewer than two samples.
EcdfSummary summarize(std::span<const double> samples, double ref_mean, double ref_variance);

// sup_x |ECDF(x) - F(x)| for a continuous reference F evaluated at sorted points.
template <class Cdf>
double ks_distance_sorted(std::span<const double> sorted, Cdf&& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace spiked
