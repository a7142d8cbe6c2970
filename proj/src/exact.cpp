#include "spiked/exact.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "spiked/errors.hpp"
#include "spiked/parallel.hpp"

namespace spiked {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// k^d, or 0 when it exceeds `cap`.
std::uint64_t capped_power(std::uint64_t k, int d, std::uint64_t cap) {
  std::uint64_t r = 1;
  for (int i = 0; i < d; ++i) {
    if (k != 0 && r > cap / k) return 0;
    r *= k;
  }
  return r <= cap ? r : 0;
}

// Sum over rows i of log sum_k w_k exp(scale*yv_i*x_k - c*x_k^2).
class UMarginalSum {
 public:
  explicit UMarginalSum(const Prior& prior) : atoms_(prior.atoms().begin(), prior.atoms().end()) {
    for (double w : prior.weights()) log_w_.push_back(std::log(w));
    binary_symmetric_ = prior.symmetric() && atoms_.size() == 2;
  }

  double operator()(const double* yv, int n, double scale, double c) const {
    return binary_symmetric_ ? binary(yv, n, scale, c) : general(yv, n, scale, c);
  }

 private:
  // log(cosh(x a)) - c x^2 = |x a| + log(1 + exp(-2|x a|)) - log 2 - c x^2.
  double binary(const double* yv, int n, double scale, double c) const {
    const double x = atoms_[1];
    const double xs = x * scale;
    // Eigen's packet exp keeps this loop vectorized.
    const Eigen::Map<const Eigen::ArrayXd> y(yv, n);
    double linear = 0.0;
    double log_prod = 0.0;
    for (int start = 0; start < n; start += kChunk) {
      const auto t = (xs * y.segment(start, std::min(kChunk, n - start))).abs();
      linear += t.sum();
      log_prod += std::log((1.0 + (-2.0 * t).exp()).prod());  // each factor lies in [1, 2]
    }
    return linear + log_prod - n * (std::numbers::ln2 + c * x * x);
  }

  double general(const double* yv, int n, double scale, double c) const {
    const std::size_t k = atoms_.size();
    double shift_total = 0.0;
    double log_prod = 0.0;
    double prod = 1.0;
    double e[16];
    std::vector<double> heap;
    double* exps = e;
    if (k > 16) {
      heap.resize(k);
      exps = heap.data();
    }
    for (int i = 0; i < n; ++i) {
      const double a = scale * yv[i];
      double mx = kNegInf;
      for (std::size_t q = 0; q < k; ++q) {
        exps[q] = log_w_[q] + atoms_[q] * (a - c * atoms_[q]);
        mx = std::max(mx, exps[q]);
      }
      double s = 0.0;
      for (std::size_t q = 0; q < k; ++q) s += std::exp(exps[q] - mx);
      shift_total += mx;
      prod *= s;  // s in [1, k]
      if (prod > 1e250) {
        log_prod += std::log(prod);
        prod = 1.0;
      }
    }
    return shift_total + log_prod + std::log(prod);
  }

  static constexpr int kChunk = 512;
  std::vector<double> atoms_;
  std::vector<double> log_w_;
  bool binary_symmetric_ = false;
};

void check_dimensions(const Instance& instance) {
  if (instance.data.rows() < 1 || instance.data.cols() < 1) {
    throw ConfigError("data matrix is empty", "data");
  }
}

}  // namespace

void LogSumExp::add(double x) noexcept {
  if (x <= max_) {
    sum_ += std::exp(x - max_);
  } else if (x != kNegInf) {
    sum_ = sum_ * std::exp(max_ - x) + 1.0;
    max_ = x;
  }
}

void LogSumExp::merge(const LogSumExp& other) noexcept {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (other.max_ <= max_) {
    sum_ += other.sum_ * std::exp(other.max_ - max_);
  } else {
    sum_ = sum_ * std::exp(max_ - other.max_) + other.sum_;
    max_ = other.max_;
  }
}

double LogSumExp::value() const noexcept { return empty() ? kNegInf : max_ + std::log(sum_); }

double u_marginal_log(double a, double c, const Prior& prior_u) {
  prior_u.require_bounded("prior_u");
  if (c < 0.0) throw ConfigError("quadratic coefficient must be >= 0", "c");
  const auto x = prior_u.atoms();
  const auto w = prior_u.weights();
  LogSumExp lse;
  for (std::size_t k = 0; k < x.size(); ++k) lse.add(std::log(w[k]) + a * x[k] - c * x[k] * x[k]);
  return lse.value();
}

GrayCode::GrayCode(int radix, int digits) : radix_(radix), digits_(digits), size_(1) {
  if (radix < 1 || digits < 0) throw ConfigError("bad Gray code shape", "radix");
  for (int d = 0; d < digits; ++d) size_ *= static_cast<std::uint64_t>(radix);
}

std::vector<int> GrayCode::codeword(std::uint64_t t) const {
  std::vector<int> out(static_cast<std::size_t>(digits_));
  const auto k = static_cast<std::uint64_t>(radix_);
  std::uint64_t q = t;
  for (int j = 0; j < digits_; ++j) {
    const std::uint64_t r = q % k;
    q /= k;
    // Digit j is reflected whenever the higher-order counter q is odd.
    out[static_cast<std::size_t>(j)] = static_cast<int>((q % 2 == 0) ? r : k - 1 - r);
  }
  return out;
}

GrayCode::Step GrayCode::step(std::uint64_t t) const {
  if (radix_ == 2) {
    const int j = std::countr_zero(t);
    return {j, ((t >> (j + 1)) & 1) == 0 ? +1 : -1};
  }
  const auto k = static_cast<std::uint64_t>(radix_);
  int j = 0;
  std::uint64_t q = t;
  while (q % k == 0) {
    q /= k;
    ++j;
  }
  // Digit j counts up while the counter above it is even.
  const std::uint64_t higher = q / k;
  return {j, higher % 2 == 0 ? +1 : -1};
}

LogLr exact_log_lr(const Instance& instance, double beta, const Prior& prior_u,
                   const Prior& prior_v, const ExactOptions& options) {
  check_dimensions(instance);
  prior_u.require_bounded("prior_u");
  prior_v.require_bounded("prior_v");
  if (!(beta >= 0.0)) throw ConfigError("must be >= 0", "beta");

  const int n = instance.n_rows();
  const int m = instance.n_cols();
  const auto kv = static_cast<int>(prior_v.size());
  const std::uint64_t total = capped_power(static_cast<std::uint64_t>(kv), m, options.max_v_configs);
  if (total == 0) {
    throw CapacityError("exact enumeration needs " + std::to_string(kv) + "^" + std::to_string(m) +
                        " v-configurations, above the cap of " +
                        std::to_string(options.max_v_configs) + " (max_v_configs)");
  }
  LogLr result;
  result.n_v_configs = total;
  if (beta == 0.0) return result;

  const bool halve = options.use_sign_symmetry && kv == 2 && prior_v.symmetric() &&
                     prior_u.symmetric();
  const int digits = halve ? m - 1 : m;
  const GrayCode code(kv, digits);

  const Eigen::MatrixXd ycol = instance.data;  // column-major: columns contiguous
  const auto atoms = prior_v.atoms();
  std::vector<double> log_w;
  for (double w : prior_v.weights()) log_w.push_back(std::log(w));

  const UMarginalSum umarg(prior_u);
  const double scale = std::sqrt(beta / n);
  const double quad = beta / (2.0 * n);

  const int blocks = static_cast<int>(
      std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::max(1, options.blocks)), 1,
                                code.size()));
  std::vector<LogSumExp> partial(static_cast<std::size_t>(blocks));

  auto run_block = [&](std::size_t b) {
    const std::uint64_t t0 = code.size() * b / blocks;
    const std::uint64_t t1 = code.size() * (b + 1) / blocks;
    std::vector<int> d = code.codeword(t0);
    std::vector<double> v(static_cast<std::size_t>(m));
    Eigen::VectorXd yv(n);
    double vsq = 0.0, logwv = 0.0;

    auto resync = [&] {
      logwv = 0.0;
      for (int j = 0; j < digits; ++j) {
        v[static_cast<std::size_t>(j)] = atoms[static_cast<std::size_t>(d[static_cast<std::size_t>(j)])];
        logwv += log_w[static_cast<std::size_t>(d[static_cast<std::size_t>(j)])];
      }
      if (halve) {
        v[static_cast<std::size_t>(m - 1)] = atoms[1];
        logwv += log_w[1];
      }
      yv.setZero();
      vsq = 0.0;
      for (int j = 0; j < m; ++j) {
        yv += v[static_cast<std::size_t>(j)] * ycol.col(j);
        vsq += v[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j)];
      }
    };
    resync();

    LogSumExp lse;
    for (std::uint64_t t = t0; t < t1; ++t) {
      if (t > t0) {
        const auto s = code.step(t);
        auto& dj = d[static_cast<std::size_t>(s.position)];
        const int old = dj;
        dj += s.delta;
        if (((t - t0) & 0xffff) == 0) {
          resync();
        } else {
          const double a_old = atoms[static_cast<std::size_t>(old)];
          const double a_new = atoms[static_cast<std::size_t>(dj)];
          yv += (a_new - a_old) * ycol.col(s.position);
          vsq += a_new * a_new - a_old * a_old;
          logwv += log_w[static_cast<std::size_t>(dj)] - log_w[static_cast<std::size_t>(old)];
        }
      }
      lse.add(logwv + umarg(yv.data(), n, scale, quad * vsq));
    }
    partial[b] = lse;
  };

  parallel_for(partial.size(), options.threads, run_block);

  LogSumExp all;
  for (const auto& p : partial) all.merge(p);
  result.value = all.value() + (halve ? std::numbers::ln2 : 0.0);
  return result;
}

JointPosterior::JointPosterior(const Instance& instance, double beta, const Prior& prior_u,
                               const Prior& prior_v, std::uint64_t max_configs)
    : n_(instance.n_rows()), m_(instance.n_cols()) {
  check_dimensions(instance);
  prior_u.require_bounded("prior_u");
  prior_v.require_bounded("prior_v");
  const auto ku = static_cast<std::uint64_t>(prior_u.size());
  const auto kv = static_cast<std::uint64_t>(prior_v.size());
  const std::uint64_t nu = capped_power(ku, n_, max_configs);
  const std::uint64_t nv = capped_power(kv, m_, max_configs);
  if (nu == 0 || nv == 0 || nu > max_configs / nv) {
    throw CapacityError("joint enumeration over (u, v) exceeds the cap of " +
                        std::to_string(max_configs) + " configurations");
  }

  auto enumerate = [](const Prior& p, int len, std::uint64_t count, std::vector<double>& rows,
                      std::vector<double>& log_w) {
    const auto a = p.atoms();
    const auto w = p.weights();
    const auto k = static_cast<std::uint64_t>(a.size());
    rows.resize(count * static_cast<std::uint64_t>(len));
    log_w.resize(count);
    for (std::uint64_t c = 0; c < count; ++c) {
      std::uint64_t q = c;
      double lw = 0.0;
      for (int i = 0; i < len; ++i) {
        const auto digit = static_cast<std::size_t>(q % k);
        q /= k;
        rows[c * static_cast<std::uint64_t>(len) + static_cast<std::uint64_t>(i)] = a[digit];
        lw += std::log(w[digit]);
      }
      log_w[c] = lw;
    }
  };
  std::vector<double> log_wu, log_wv;
  enumerate(prior_u, n_, nu, u_configs_, log_wu);
  enumerate(prior_v, m_, nv, v_configs_, log_wv);

  const double scale = std::sqrt(beta / n_);
  const double quad = beta / (2.0 * n_);
  std::vector<double> usq(nu);
  for (std::uint64_t a = 0; a < nu; ++a) {
    const Eigen::Map<const Eigen::VectorXd> u(&u_configs_[a * static_cast<std::uint64_t>(n_)], n_);
    usq[a] = u.squaredNorm();
  }

  std::vector<double> log_p;
  log_p.reserve(nu * nv);
  u_index_.reserve(nu * nv);
  v_index_.reserve(nu * nv);
  LogSumExp lse;
  for (std::uint64_t b = 0; b < nv; ++b) {
    const Eigen::Map<const Eigen::VectorXd> v(&v_configs_[b * static_cast<std::uint64_t>(m_)], m_);
    const Eigen::VectorXd yv = instance.data * v;
    const double vsq = v.squaredNorm();
    for (std::uint64_t a = 0; a < nu; ++a) {
      const Eigen::Map<const Eigen::VectorXd> u(&u_configs_[a * static_cast<std::uint64_t>(n_)], n_);
      const double lp = log_wu[a] + log_wv[b] + scale * u.dot(yv) - quad * usq[a] * vsq;
      log_p.push_back(lp);
      lse.add(lp);
      u_index_.push_back(static_cast<std::uint32_t>(a));
      v_index_.push_back(static_cast<std::uint32_t>(b));
    }
  }
  log_z_ = lse.value();
  prob_.resize(log_p.size());
  cdf_.resize(log_p.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < log_p.size(); ++k) {
    prob_[k] = std::exp(log_p[k] - log_z_);
    acc += prob_[k];
    cdf_[k] = acc;
  }
}

std::span<const double> JointPosterior::u(std::size_t k) const {
  return {u_configs_.data() + static_cast<std::size_t>(u_index_[k]) * static_cast<std::size_t>(n_),
          static_cast<std::size_t>(n_)};
}

std::span<const double> JointPosterior::v(std::size_t k) const {
  return {v_configs_.data() + static_cast<std::size_t>(v_index_[k]) * static_cast<std::size_t>(m_),
          static_cast<std::size_t>(m_)};
}

std::size_t JointPosterior::sample(Rng& rng) const {
  const double x = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

std::string OverlapObservable::tag() const {
  const std::string pair = partner == Partner::Replica ? "1,2" : "1,*";
  std::string out;
  auto term = [&](const char* name, int p) {
    if (p == 0) return;
    if (!out.empty()) out += "*";
    out += std::string("R") + name + "_{" + pair + "}";
    if (p > 1) out += "^" + std::to_string(p);
  };
  term("u", u_power);
  term("v", v_power);
  return out.empty() ? "1" : out;
}

double gibbs_expectation(const JointPosterior& posterior, const Instance& instance,
                         const OverlapObservable& obs) {
  const int p = obs.u_power, q = obs.v_power;
  if (p < 0 || q < 0 || p + q > 4) {
    throw ConfigError("overlap powers must be nonnegative with total degree <= 4", "observable");
  }
  const int n = posterior.n_rows(), m = posterior.n_cols();
  const double inv_n = 1.0 / n;

  if (obs.partner == OverlapObservable::Partner::Star) {
    if (!instance.planted) {
      throw ConfigError("star overlaps need a spiked instance", "observable");
    }
    const Eigen::Map<const Eigen::VectorXd> us(instance.planted->u.data(), n);
    const Eigen::Map<const Eigen::VectorXd> vs(instance.planted->v.data(), m);
    double acc = 0.0;
    for (std::size_t k = 0; k < posterior.size(); ++k) {
      const double ru = Eigen::Map<const Eigen::VectorXd>(posterior.u(k).data(), n).dot(us) * inv_n;
      const double rv = Eigen::Map<const Eigen::VectorXd>(posterior.v(k).data(), m).dot(vs) * inv_n;
      acc += posterior.probability(k) * std::pow(ru, p) * std::pow(rv, q);
    }
    return acc;
  }

  // Moment tensor over index tuples (i_1..i_p, j_1..j_q).
  std::vector<int> idx(static_cast<std::size_t>(p + q), 0);
  auto bound = [&](int slot) { return slot < p ? n : m; };
  double total = 0.0;
  for (;;) {
    double t = 0.0;
    for (std::size_t k = 0; k < posterior.size(); ++k) {
      const auto u = posterior.u(k);
      const auto v = posterior.v(k);
      double mono = posterior.probability(k);
      for (int s = 0; s < p; ++s) mono *= u[static_cast<std::size_t>(idx[static_cast<std::size_t>(s)])];
      for (int s = p; s < p + q; ++s) mono *= v[static_cast<std::size_t>(idx[static_cast<std::size_t>(s)])];
      t += mono;
    }
    total += t * t;
    int s = 0;
    for (; s < p + q; ++s) {
      if (++idx[static_cast<std::size_t>(s)] < bound(s)) break;
      idx[static_cast<std::size_t>(s)] = 0;
    }
    if (s == p + q) break;
  }
  return total * std::pow(inv_n, p + q);
}

ExactGibbs exact_gibbs(const Instance& instance, double beta, const Prior& prior_u,
                       const Prior& prior_v, const OverlapObservable& observable,
                       const ExactOptions& options) {
  const JointPosterior posterior(instance, beta, prior_u, prior_v, options.max_joint_evaluations);
  const int reps = observable.n_replicas();
  if (capped_power(posterior.size(), reps, options.max_joint_evaluations) == 0) {
    throw CapacityError("replica enumeration exceeds the joint evaluation cap");
  }
  return {observable.tag(), gibbs_expectation(posterior, instance, observable), reps};
}

double exact_replica_average(const Instance& instance, double beta, const Prior& prior_u,
                             const Prior& prior_v, int n_replicas,
                             const std::function<double(std::span<const ReplicaView>)>& f,
                             const ExactOptions& options) {
  if (n_replicas < 1) throw ConfigError("must be >= 1", "n_replicas");
  const JointPosterior posterior(instance, beta, prior_u, prior_v, options.max_joint_evaluations);
  const std::uint64_t tuples = capped_power(posterior.size(), n_replicas, options.max_joint_evaluations);
  if (tuples == 0) throw CapacityError("replica enumeration exceeds the joint evaluation cap");

  std::vector<std::size_t> idx(static_cast<std::size_t>(n_replicas), 0);
  std::vector<ReplicaView> views(static_cast<std::size_t>(n_replicas));
  double acc = 0.0;
  for (std::uint64_t t = 0; t < tuples; ++t) {
    double w = 1.0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      w *= posterior.probability(idx[r]);
      views[r] = {posterior.u(idx[r]), posterior.v(idx[r])};
    }
    acc += w * f(views);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (++idx[r] < posterior.size()) break;
      idx[r] = 0;
    }
  }
  return acc;
}

}  // namespace spiked
