#include <doctest.h>

#include <cmath>

#include "spiked/errors.hpp"
#include "spiked/harness.hpp"

using namespace spiked;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.sizes = {{5, 0}, {6, 4}};
  c.samples = 60;
  c.seed = 3;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("fluctuation reports do not depend on the thread count") {
  ExperimentConfig c = small_config();
  const FluctuationReport a = fluctuation_experiment(c);
  c.threads = 4;
  const FluctuationReport b = fluctuation_experiment(c);
  CHECK(a.samples_csv() == b.samples_csv());
  REQUIRE(a.sizes.size() == 2);
  CHECK(a.sizes[1].m == 4);
  CHECK(a.sizes[0].null_samples.summary.mean == b.sizes[0].null_samples.summary.mean);
  CHECK(a.regime == "proven");
  CHECK(a.samples_csv().rfind("hypothesis,sample_index,N,M,beta,seed,log_lr\n", 0) == 0);
  const auto j = a.to_json();
  CHECK(j["schema_version"] == 1);
  CHECK(j["sizes"][0]["null"]["log_lr"].size() == 60);
}

TEST_CASE("samples are keyed by hypothesis, size and index") {
  CHECK(sample_seed(1, Hypothesis::Null, 4, 4, 0) != sample_seed(1, Hypothesis::Spiked, 4, 4, 0));
  CHECK(sample_seed(1, Hypothesis::Null, 4, 4, 0) != sample_seed(1, Hypothesis::Null, 4, 5, 0));
  // the seed column reproduces each log L on its own
  ExperimentConfig c = small_config();
  c.sizes = {{4, 4}};
  c.samples = 3;
  const FluctuationReport r = fluctuation_experiment(c);
  const Prior p = Prior::rademacher();
  const auto& alt = r.sizes[0].alt_samples;
  const Instance inst = generate({4, 4, c.beta}, Hypothesis::Spiked, p, p, alt.seeds[2]);
  CHECK(exact_log_lr(inst, c.beta, p, p).value == alt.log_lr[2]);
}

TEST_CASE("beta = 0: every log L is zero and ties go to the null") {
  ExperimentConfig c = small_config();
  c.beta = 0.0;
  const FluctuationReport r = fluctuation_experiment(c);
  const auto& e = r.sizes[0].test_error;
  CHECK(e.type1 == 0.0);
  CHECK(e.type2 == 1.0);
  CHECK(e.empirical_err == 1.0);
  CHECK(e.degenerate_ties);
  CHECK(e.predicted_err == 1.0);
  CHECK(r.sizes[0].alt_samples.summary.degenerate_reference);
}

TEST_CASE("test error counting") {
  HypothesisSamples n, a;
  n.log_lr = {-1.0, 0.5, 0.0, -2.0};
  a.log_lr = {1.0, 0.0, -0.1, 2.0};
  const LrTestError e = lr_test_error(n, a, 1.0, 0.6);
  CHECK(e.type1 == 0.25);
  CHECK(e.type2 == 0.5);
  CHECK(e.se_type1 == doctest::Approx(std::sqrt(0.25 * 0.75 / 4)));
  CHECK(std::isnan(lr_test_error(n, a, 1.0, 1.2).predicted_err));
}

TEST_CASE("regime labels") {
  const Prior r = Prior::rademacher(), s = Prior::sparse_rademacher(0.25);
  CHECK(regime(1.0, 0.6, r, r) == "proven");
  CHECK(regime(1.0, 0.6, s, r) == "conjectured");
  CHECK(regime(1.0, 1.1, r, r) == "above_bbp");
  CHECK(regime(1.0, 1.0, r, r) == "above_bbp");
}

TEST_CASE("outside the region predictions are flagged, samples still reported") {
  ExperimentConfig c = small_config();
  c.beta = 1.3;
  c.sizes = {{4, 4}};
  const FluctuationReport r = fluctuation_experiment(c);
  CHECK_FALSE(r.predicted.valid);
  CHECK(r.regime == "above_bbp");
  CHECK(std::isnan(r.sizes[0].char_fn_distance[0]));
  CHECK(r.sizes[0].alt_samples.log_lr.size() == 60);
  CHECK(r.to_json()["predicted"]["mean_alt"].is_null());
}

TEST_CASE("capacity and engine errors") {
  ExperimentConfig c = small_config();
  c.sizes = {{4, 30}};
  c.max_v_configs = 1 << 10;
  CHECK_THROWS_AS(fluctuation_experiment(c), CapacityError);
  c = small_config();
  c.engine = Engine::Mcmc;
  CHECK_THROWS_AS(fluctuation_experiment(c), ConfigError);
  c = small_config();
  c.prior_u.family = PriorFamily::GaussianRsOnly;
  CHECK_THROWS_AS(fluctuation_experiment(c), ConfigError);
}

TEST_CASE("kl experiment is nonnegative on average") {
  ExperimentConfig c = small_config();
  c.samples = 400;
  const KlReport r = kl_experiment(c);
  REQUIRE(r.points.size() == 2);
  for (const auto& p : r.points) CHECK(p.empirical_mean > -3 * p.se);
  CHECK(r.predicted == doctest::Approx(-0.25 * std::log(0.64)));
}

TEST_CASE("identity checks at beta = 0 give zeros") {
  ExperimentConfig c = small_config();
  c.beta = 0.0;
  c.sizes = {{3, 3}};
  c.samples = 50;
  const NishimoriReport n = nishimori_check(c);
  REQUIRE(n.comparisons.size() == 3);
  // At beta = 0 the posterior is the prior: <R_12^2> = E R_1*^2 = 1/N
  CHECK(n.comparisons[0].replica_mean == doctest::Approx(1.0 / 3));
  CHECK(n.comparisons[2].replica_mean == doctest::Approx(0.0).scale(1.0));
  c.beta = 0.0;
  const DerivativeReport d = derivative_identity_check(c);
  CHECK(std::abs(d.overlap_rhs) < 1e-12);
  CHECK(std::abs(d.fd_derivative) < 0.05);
}

TEST_CASE("small nishimori and derivative runs agree within error") {
  ExperimentConfig c = small_config();
  c.sizes = {{3, 3}};
  c.samples = 3000;
  c.beta = 0.8;
  const NishimoriReport n = nishimori_check(c);
  for (const auto& cmp : n.comparisons) CHECK(std::abs(cmp.z()) < 4.0);
  c.beta = 0.5;
  const DerivativeReport d = derivative_identity_check(c);
  CHECK(std::abs(d.gap) < 4 * d.gap_se + c.delta_beta * c.delta_beta);
  CHECK(d.overlap_rhs > 0.0);
}

TEST_CASE("spectral buffer calibration is cached and nonnegative") {
  const double a = calibrate_spectral_buffer(30, 30, 50, 1, 1);
  const double b = calibrate_spectral_buffer(30, 30, 50, 1, 3);
  CHECK(a == b);
  CHECK(a >= 0.0);
}
