#include <doctest.h>

#include <cmath>

#include "spiked/errors.hpp"
#include "spiked/predict.hpp"
#include "spiked/rng.hpp"

using namespace spiked;

namespace {

// erfc from the Maclaurin series of erf; fine for |x| < 2.
double erfc_series(double x) {
  double term = x, sum = x;
  for (int n = 1; n < 80; ++n) {
    term *= -x * x / n;
    sum += term / (2 * n + 1);
  }
  return 1.0 - 2.0 / std::sqrt(M_PI) * sum;
}

}  // namespace

TEST_CASE("limiting law of log L") {
  const LrAsymptotics a = lr_asymptotics(1.0, 0.6);
  CHECK(a.valid);
  CHECK(a.mean_null == doctest::Approx(0.25 * std::log(0.64)));
  CHECK(a.mean_alt == doctest::Approx(-0.25 * std::log(0.64)));
  CHECK(a.variance == doctest::Approx(-0.5 * std::log(0.64)));
  CHECK(a.mean_alt == doctest::Approx(0.11157).epsilon(1e-4));
  // mean = variance / 2 under the alternative
  CHECK(a.mean_alt == doctest::Approx(a.variance / 2));

  const LrAsymptotics z = lr_asymptotics(3.0, 0.0);
  CHECK(z.valid);
  CHECK(z.variance == 0.0);

  const LrAsymptotics out = lr_asymptotics(1.0, 1.0);
  CHECK_FALSE(out.valid);
  CHECK(std::isnan(out.mean_alt));
}

TEST_CASE("scalar predictions") {
  CHECK(spiked::erfc(0.16698) == doctest::Approx(erfc_series(0.16698)).epsilon(1e-13));
  for (double x : {0.0, 0.3, 1.1, 1.9}) CHECK(spiked::erfc(x) == doctest::Approx(erfc_series(x)).epsilon(1e-12));
  const double e = optimal_error(1.0, 0.6);
  CHECK(e == doctest::Approx(erfc_series(0.25 * std::sqrt(-std::log(0.64)))).epsilon(1e-12));
  CHECK(e == doctest::Approx(0.8133).epsilon(1e-3));
  CHECK(optimal_error(1.0, 0.0) == 1.0);
  CHECK(kl_limit(1.0, 0.6) == doctest::Approx(0.111572).epsilon(1e-5));
  CHECK(theta(1.0, 0.5) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(optimal_error(1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(kl_limit(4.0, 0.6), ConfigError);
  CHECK_THROWS_AS(theta(1.0, 1.1), ConfigError);
}

TEST_CASE("characteristic function") {
  const double var = -0.5 * std::log(0.64);
  for (double s : {0.0, 0.5, 1.0, 2.0}) {
    const auto phi = char_fn(s, 1.0, 0.6, Hypothesis::Spiked);
    CHECK(std::abs(phi) <= 1.0 + 1e-15);
    CHECK(std::abs(phi) == doctest::Approx(std::exp(-var * s * s / 2)));
    CHECK(std::arg(phi) == doctest::Approx(std::remainder(s * var / 2, 2 * M_PI)).scale(1.0));
    // null and alternative are complex conjugates
    CHECK(std::abs(char_fn(s, 1.0, 0.6, Hypothesis::Null) - std::conj(phi)) < 1e-15);
  }
  CHECK(char_fn(1.0, 1.0, 0.0, Hypothesis::Spiked) == std::complex<double>(1.0, 0.0));
}

TEST_CASE("empirical summaries") {
  Rng rng(10);
  std::vector<double> x(5000);
  for (auto& v : x) v = 2.0 + 3.0 * rng.normal();
  const EcdfSummary s = summarize(x, 2.0, 9.0);
  CHECK(s.n == 5000);
  CHECK(std::abs(s.mean - 2.0) < 4 * s.se_mean);
  CHECK(std::abs(s.variance - 9.0) < 4 * s.se_variance);
  CHECK(s.se_mean == doctest::Approx(3.0 / std::sqrt(5000.0)).epsilon(0.05));
  // KS for a correct reference is O(1/sqrt(n)); a shifted one is large
  CHECK(s.ks_distance < 1.63 / std::sqrt(5000.0));
  CHECK(summarize(x, 3.5, 9.0).ks_distance > 0.15);
  CHECK(std::is_sorted(s.sorted.begin(), s.sorted.end()));

  const std::vector<double> zeros(10, 0.0);
  const EcdfSummary d = summarize(zeros, 0.0, 0.0);
  CHECK(d.degenerate_reference);
  CHECK(d.variance == 0.0);
  CHECK_THROWS_AS(summarize(std::vector<double>{1.0}, 0.0, 1.0), ConfigError);
}

TEST_CASE("ks distance on a hand example") {
  const std::vector<double> pts = {0.1, 0.2, 0.9};
  // uniform cdf: max over |i/n - x|
  const double d = ks_distance_sorted(std::span<const double>(pts), [](double x) { return x; });
  CHECK(d == doctest::Approx(2.0 / 3.0 - 0.2));
}
