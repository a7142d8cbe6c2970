#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spiked/model.hpp"
#include "spiked/prior.hpp"

namespace spiked {

// Streaming log-sum-exp with a running maximum; partial sums merge exactly.
class LogSumExp {
 public:
  void add(double x) noexcept;
  void merge(const LogSumExp& other) noexcept;
  double value() const noexcept;
  bool empty() const noexcept { return max_ == -std::numeric_limits<double>::infinity(); }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

// log sum_k w_k exp(a x_k - c x_k^2), max-shifted.
double u_marginal_log(double a, double c, const Prior& prior_u);

struct ExactOptions {
  std::uint64_t max_v_configs = std::uint64_t{1} << 24;
  std::uint64_t max_joint_evaluations = std::uint64_t{1} << 30;
  // The v-enumeration is split into this many contiguous Gray-code blocks;
  // blocks run on up to `threads` workers and merge in block order.
  int blocks = 1;
  int threads = 1;
  // Pair v with -v when both priors are symmetric and P_v has two atoms.
  bool use_sign_symmetry = true;
};

enum class LrMethod { ExactEnumeration, McEstimate };

struct LogLr {
  double value = 0.0;
  std::uint64_t n_v_configs = 0;  // k_v^M
  LrMethod method = LrMethod::ExactEnumeration;
};

// Reflected k-ary Gray code over `digits` positions. Step t (t >= 1) changes
// exactly one digit by +-1.
class GrayCode {
 public:
  GrayCode(int radix, int digits);

  std::uint64_t size() const noexcept { return size_; }
  // Digits of the t-th codeword.
  std::vector<int> codeword(std::uint64_t t) const;
  struct Step {
    int position;
    int delta;  // +1 or -1
  };
  // Change from codeword t-1 to codeword t.
  Step step(std::uint64_t t) const;

 private:
  int radix_;
  int digits_;
  std::uint64_t size_;
};

// log L(Y; beta) by summing over v configurations and integrating u
// coordinate-wise. Throws CapacityError when k_v^M exceeds the cap.
LogLr exact_log_lr(const Instance& instance, double beta, const Prior& prior_u,
                   const Prior& prior_v, const ExactOptions& options = {});

// Every joint configuration (u, v) with its posterior probability. Feasible
// only for tiny N + M.
class JointPosterior {
 public:
  JointPosterior(const Instance& instance, double beta, const Prior& prior_u,
                 const Prior& prior_v, std::uint64_t max_configs = std::uint64_t{1} << 24);

  std::size_t size() const noexcept { return u_index_.size(); }
  int n_rows() const noexcept { return n_; }
  int n_cols() const noexcept { return m_; }
  std::span<const double> u(std::size_t k) const;
  std::span<const double> v(std::size_t k) const;
  double probability(std::size_t k) const { return prob_[k]; }
  // log of the normalizing constant = log L(Y; beta).
  double log_normalizer() const noexcept { return log_z_; }

  // Posterior draw by inverse CDF.
  std::size_t sample(Rng& rng) const;

 private:
  int n_, m_;
  std::vector<double> u_configs_;  // row-major, one row per u configuration
  std::vector<double> v_configs_;
  std::vector<std::uint32_t> u_index_, v_index_;
  std::vector<double> prob_;
  std::vector<double> cdf_;
  double log_z_ = 0.0;
};

// R^u_{1,partner}^u_power * R^v_{1,partner}^v_power, with both overlaps
// normalized by N. partner is a second replica or the planted pair.
struct OverlapObservable {
  enum class Partner { Replica, Star };
  int u_power = 0;
  int v_power = 0;
  Partner partner = Partner::Replica;

  std::string tag() const;
  int n_replicas() const noexcept {
    return (u_power + v_power == 0) ? 1 : (partner == Partner::Replica ? 2 : 1);
  }
};

struct ExactGibbs {
  std::string observable_tag;
  double value = 0.0;
  int n_replicas = 1;
};

// <observable> under the exact posterior. Replica-replica observables are
// evaluated through posterior moment tensors:
//   <prod R> = N^-(p+q) sum_{idx} <u_i1..u_ip v_j1..v_jq>^2.
double gibbs_expectation(const JointPosterior& posterior, const Instance& instance,
                         const OverlapObservable& observable);

ExactGibbs exact_gibbs(const Instance& instance, double beta, const Prior& prior_u,
                       const Prior& prior_v, const OverlapObservable& observable,
                       const ExactOptions& options = {});

struct ReplicaView {
  std::span<const double> u;
  std::span<const double> v;
};

// Brute-force <f> over n independent replicas: sums over all n-tuples of
// joint configurations. Cost (k_u^N k_v^M)^n, capped.
double exact_replica_average(const Instance& instance, double beta, const Prior& prior_u,
                             const Prior& prior_v, int n_replicas,
                             const std::function<double(std::span<const ReplicaView>)>& f,
                             const ExactOptions& options = {});

}  // namespace spiked
