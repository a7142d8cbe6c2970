#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/config.hpp"
#include "spiked/exact.hpp"
#include "spiked/mcmc.hpp"
#include "spiked/predict.hpp"

namespace spiked {

inline constexpr int kReportSchemaVersion = 1;

// Seed of sample `index` for hypothesis `h` at size (n, m).
std::uint64_t sample_seed(std::uint64_t master, Hypothesis h, int n, int m, std::uint64_t index);

// Regime label: "proven" (K_u^4 K_v^4 alpha beta^2 < 1), "conjectured"
// (alpha beta^2 < 1 only) or "above_bbp".
std::string regime(double alpha, double beta, const Prior& prior_u, const Prior& prior_v);

struct HypothesisSamples {
  Hypothesis hypothesis = Hypothesis::Null;
  std::vector<double> log_lr;
  std::vector<std::uint64_t> seeds;
  EcdfSummary summary;
  std::vector<std::complex<double>> char_fn;  // empirical, at cfg.s_grid
  std::vector<double> char_fn_se;             // sqrt((1 - |phi|^2) / n)
};

struct LrTestError {
  double type1 = 0.0;  // P_0(log L > 0)
  double type2 = 0.0;  // P_beta(log L <= 0); ties count as accepting the null
  double empirical_err = 0.0;
  double se_type1 = 0.0;
  double se_type2 = 0.0;
  double se_err = 0.0;
  double predicted_err = 0.0;  // NaN outside alpha beta^2 < 1
  bool degenerate_ties = false;  // every sample equals 0 (beta = 0)

  nlohmann::json to_json() const;
};

struct SizeResult {
  int n = 0;
  int m = 0;
  HypothesisSamples null_samples;
  HypothesisSamples alt_samples;
  std::vector<std::complex<double>> char_fn_predicted;  // alternative, at cfg.s_grid
  std::vector<double> char_fn_distance;                 // |empirical - predicted| (alternative)
  LrTestError test_error;
  double sign_gap = 0.0;     // mean_null + mean_alt
  double sign_gap_se = 0.0;  // combined SE
  double poincare_bound = 0.0;  // beta N alpha K_u^2 K_v^2
};

struct FluctuationReport {
  ExperimentConfig config;
  LrAsymptotics predicted;
  std::string regime;
  std::vector<SizeResult> sizes;
  double runtime_seconds = 0.0;

  nlohmann::json to_json() const;
  // hypothesis,sample_index,N,M,beta,seed,log_lr
  std::string samples_csv() const;
};

// Draws cfg.samples instances per hypothesis and size and evaluates log L
// exactly. Throws CapacityError when a size exceeds the enumeration cap.
FluctuationReport fluctuation_experiment(const ExperimentConfig& cfg);

LrTestError lr_test_error(const HypothesisSamples& null_samples, const HypothesisSamples& alt_samples,
                          double alpha, double beta);
// One record per configured size.
std::vector<LrTestError> lr_test_error(const ExperimentConfig& cfg);

struct KlPoint {
  int n = 0;
  int m = 0;
  double empirical_mean = 0.0;  // E_{P_beta} log L
  double se = 0.0;
};

struct KlReport {
  std::vector<KlPoint> points;
  double predicted = 0.0;  // NaN outside alpha beta^2 < 1
  nlohmann::json to_json() const;
};

KlReport kl_experiment(const ExperimentConfig& cfg);

struct PairedComparison {
  std::string observable;  // e.g. "Ru^2"
  double replica_mean = 0.0;  // E<f(R_{1,2})>
  double star_mean = 0.0;     // E<f(R_{1,*})>
  double replica_se = 0.0;
  double star_se = 0.0;
  double diff_se = 0.0;  // SE of the per-instance difference
  double z() const { return diff_se > 0.0 ? (replica_mean - star_mean) / diff_se : 0.0; }
};

struct NishimoriReport {
  int n = 0, m = 0;
  std::size_t draws = 0;
  std::vector<PairedComparison> comparisons;  // Ru^2, Rv^2, Ru*Rv
  nlohmann::json to_json() const;
};

// Replica-replica versus replica-spike second moments over cfg.samples
// spiked draws at cfg.sizes[0].
NishimoriReport nishimori_check(const ExperimentConfig& cfg);

struct DerivativeReport {
  int n = 0, m = 0;
  std::size_t draws = 0;
  double delta_beta = 0.0;
  double fd_derivative = 0.0;  // [log L(Y_{b+d}; b+d) - log L(Y_{b-d}; b-d)] / 2d, averaged
  double fd_se = 0.0;
  double overlap_rhs = 0.0;  // (N/2) E<R^u_{1,2} R^v_{1,2}>
  double rhs_se = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;  // SE of the per-draw difference
  nlohmann::json to_json() const;
};

// Common random numbers: the same (W, u*, v*) is assembled at beta +- delta.
DerivativeReport derivative_identity_check(const ExperimentConfig& cfg);

struct McmcValidation {
  struct Row {
    std::string observable;
    double exact = 0.0;
    double mcmc = 0.0;
    double se = 0.0;
  };
  int n = 0, m = 0;
  std::vector<Row> rows;
  bool passed(double k_se = 3.0) const;
  nlohmann::json to_json() const;
};

// Long single-instance chain at (n, m) checked against exact enumeration.
McmcValidation validate_mcmc(const ExperimentConfig& cfg, int n, int m, int sweeps);

struct OverlapPoint {
  int n = 0, m = 0;
  std::size_t instances = 0;
  double n_ru_rv = 0.0, n_ru_rv_se = 0.0;   // N E<R^u R^v>
  double ru2 = 0.0, ru2_se = 0.0;           // E<(R^u)^2>
  double rv2 = 0.0, rv2_se = 0.0;
  double ru1s2 = 0.0, ru1s2_se = 0.0;       // E<(R^u_{1,*})^2>
  double n2_ru4 = 0.0, n2_ru4_se = 0.0;     // N^2 E<(R^u)^4>
  double n2_rv4 = 0.0, n2_rv4_se = 0.0;
  std::size_t unreliable_chains = 0;
  std::size_t bound_violations = 0;
};

struct OverlapReport {
  std::vector<OverlapPoint> points;
  double theta = 0.0;  // alpha beta / (1 - alpha beta^2); NaN outside the region
  double ru2_loglog_slope = 0.0;  // least-squares slope of log E<(R^u)^2> on log N
  nlohmann::json to_json() const;
};

OverlapReport overlap_scaling(const ExperimentConfig& cfg);

struct SpectralPowerReport {
  int n = 0, m = 0;
  double buffer = 0.0;  // 99th percentile of (top - edge) over null calibration draws
  double bulk_edge = 0.0;
  double power_above = 0.0;  // detection rate at beta_above
  double power_below = 0.0;  // detection rate at beta_below
  double false_alarm = 0.0;
  double accuracy_below = 0.0;  // (1 - false_alarm + power_below) / 2
  double null_within_quarter = 0.0;  // fraction of null draws with |top - edge| <= 0.25
  nlohmann::json to_json() const;
};

// Buffer calibrated once per (n, m, calibration, seed) and cached.
double calibrate_spectral_buffer(int n, int m, int draws, std::uint64_t seed, int threads);

SpectralPowerReport spectral_power_experiment(const ExperimentConfig& cfg);

}  // namespace spiked
