#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/model.hpp"
#include "spiked/prior.hpp"
#include "spiked/rng.hpp"

namespace spiked {

struct ChainConfig {
  int n_replicas = 2;
  int n_sweeps = 3000;  // total, including burn-in
  int burn_in = 1000;
  int thinning = 10;
  std::uint64_t seed = 0;
  bool random_scan = false;
  int n_batches = 30;

  void validate() const;
  nlohmann::json to_json() const;
};

// One replica (u, v) with cached Y v, Y^T u, |u|^2 and |v|^2.
struct ReplicaState {
  std::vector<double> u;
  std::vector<double> v;
  Eigen::VectorXd yv;
  Eigen::VectorXd ytu;
  double u_sq = 0.0;
  double v_sq = 0.0;

  // Recomputes the caches from (u, v).
  void refresh(const Matrix& y);
};

// Precomputed per-instance data shared by all sweeps.
class SweepContext {
 public:
  SweepContext(const Instance& instance, double beta, const Prior& prior_u, const Prior& prior_v);

  const Matrix& rows() const noexcept { return y_; }
  const Eigen::MatrixXd& cols() const noexcept { return y_col_; }
  double scale() const noexcept { return scale_; }
  double quad() const noexcept { return quad_; }
  const Prior& prior_u() const noexcept { return *prior_u_; }
  const Prior& prior_v() const noexcept { return *prior_v_; }

  // Fills `probs` with the normalized single-site conditional for a site whose
  // linear field is `field` and quadratic coefficient `c`; returns the sum of
  // the normalized weights (1 up to rounding).
  double conditional(const Prior& prior, double field, double c, std::vector<double>& probs) const;

 private:
  Matrix y_;
  Eigen::MatrixXd y_col_;
  double scale_;
  double quad_;
  const Prior* prior_u_;
  const Prior* prior_v_;
};

ReplicaState random_state(const SweepContext& ctx, Rng& rng);

// One scan over all sites: u_1..u_N then v_1..v_M (systematic), or N + M
// uniformly chosen sites (random scan).
void gibbs_sweep(ReplicaState& state, const SweepContext& ctx, Rng& rng, bool random_scan = false);

void gibbs_sweep(ReplicaState& state, const Instance& instance, double beta, const Prior& prior_u,
                 const Prior& prior_v, Rng& rng, bool random_scan = false);

struct ObservableStats {
  std::string name;
  double mean = 0.0;
  double variance = 0.0;
  double standard_error = 0.0;  // batch means
  double n_effective = 0.0;
  std::size_t n_samples = 0;
  bool reliable = true;  // n_effective >= 50
};

struct OverlapStats {
  std::vector<ObservableStats> observables;
  ChainConfig config;
  std::size_t bound_violations = 0;  // samples outside |R^u| <= K_u^2, |R^v| <= (M/N) K_v^2

  const ObservableStats& at(const std::string& name) const;
  bool has(const std::string& name) const;
  bool reliable() const;
  nlohmann::json to_json() const;
};

// Observable names: "Ru12", "Rv12", "Ru12^2", "Rv12^2", "Ru12^4", "Rv12^4",
// "Ru12*Rv12", and for spiked instances "Ru1*", "Rv1*", "Ru1*^2", "Rv1*^2",
// "Ru1**Rv1*". Replica-replica values average over all replica pairs.
OverlapStats estimate_overlaps(const Instance& instance, double beta, const Prior& prior_u,
                               const Prior& prior_v, const ChainConfig& cfg);

// Batch-means summary of a time series.
ObservableStats batch_means(std::string name, const std::vector<double>& series, int n_batches);

}  // namespace spiked
