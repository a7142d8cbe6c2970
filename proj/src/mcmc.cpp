#include "spiked/mcmc.hpp"

#include <algorithm>
#include <cmath>

#include "spiked/errors.hpp"

namespace spiked {

void ChainConfig::validate() const {
  if (n_replicas < 2) throw ConfigError("must be >= 2", "mcmc.replicas");
  if (burn_in < 0) throw ConfigError("must be >= 0", "mcmc.burn_in");
  if (burn_in >= n_sweeps) throw ConfigError("burn_in must be smaller than sweeps", "mcmc.sweeps");
  if (thinning < 1) throw ConfigError("must be >= 1", "mcmc.thinning");
  if (n_batches < 2) throw ConfigError("must be >= 2", "mcmc.batches");
}

nlohmann::json ChainConfig::to_json() const {
  return {{"replicas", n_replicas}, {"sweeps", n_sweeps},       {"burn_in", burn_in},
          {"thinning", thinning},   {"seed", seed},             {"random_scan", random_scan},
          {"batches", n_batches}};
}

void ReplicaState::refresh(const Matrix& y) {
  const Eigen::Map<const Eigen::VectorXd> uu(u.data(), static_cast<Eigen::Index>(u.size()));
  const Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(v.size()));
  yv = y * vv;
  ytu = y.transpose() * uu;
  u_sq = uu.squaredNorm();
  v_sq = vv.squaredNorm();
}

SweepContext::SweepContext(const Instance& instance, double beta, const Prior& prior_u,
                           const Prior& prior_v)
    : y_(instance.data),
      y_col_(instance.data),
      scale_(std::sqrt(beta / instance.n_rows())),
      quad_(beta / (2.0 * instance.n_rows())),
      prior_u_(&prior_u),
      prior_v_(&prior_v) {
  prior_u.require_bounded("prior_u");
  prior_v.require_bounded("prior_v");
  if (!(beta >= 0.0)) throw ConfigError("must be >= 0", "beta");
}

double SweepContext::conditional(const Prior& prior, double field, double c,
                                 std::vector<double>& probs) const {
  const auto a = prior.atoms();
  const auto w = prior.weights();
  probs.resize(a.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.size(); ++k) {
    probs[k] = std::log(w[k]) + a[k] * (field - c * a[k]);
    mx = std::max(mx, probs[k]);
  }
  double total = 0.0;
  for (auto& p : probs) {
    p = std::exp(p - mx);
    total += p;
  }
  double check = 0.0;
  for (auto& p : probs) {
    p /= total;
    check += p;
  }
  return check;
}

ReplicaState random_state(const SweepContext& ctx, Rng& rng) {
  ReplicaState s;
  s.u = sample(ctx.prior_u(), static_cast<std::size_t>(ctx.rows().rows()), rng);
  s.v = sample(ctx.prior_v(), static_cast<std::size_t>(ctx.rows().cols()), rng);
  s.refresh(ctx.rows());
  return s;
}

namespace {

std::size_t draw(const std::vector<double>& probs, Rng& rng) {
  double x = rng.uniform();
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    if (x < probs[k]) return k;
    x -= probs[k];
  }
  return probs.size() - 1;
}

void update_u(ReplicaState& s, const SweepContext& ctx, Eigen::Index i, Rng& rng,
              std::vector<double>& probs) {
  const Prior& p = ctx.prior_u();
  ctx.conditional(p, ctx.scale() * s.yv[i], ctx.quad() * s.v_sq, probs);
  const double next = p.atoms()[draw(probs, rng)];
  const double old = s.u[static_cast<std::size_t>(i)];
  if (next != old) {
    s.ytu.noalias() += (next - old) * ctx.rows().row(i).transpose();
    s.u_sq += next * next - old * old;
    s.u[static_cast<std::size_t>(i)] = next;
  }
}

void update_v(ReplicaState& s, const SweepContext& ctx, Eigen::Index j, Rng& rng,
              std::vector<double>& probs) {
  const Prior& p = ctx.prior_v();
  ctx.conditional(p, ctx.scale() * s.ytu[j], ctx.quad() * s.u_sq, probs);
  const double next = p.atoms()[draw(probs, rng)];
  const double old = s.v[static_cast<std::size_t>(j)];
  if (next != old) {
    s.yv.noalias() += (next - old) * ctx.cols().col(j);
    s.v_sq += next * next - old * old;
    s.v[static_cast<std::size_t>(j)] = next;
  }
}

}  // namespace

void gibbs_sweep(ReplicaState& state, const SweepContext& ctx, Rng& rng, bool random_scan) {
  const Eigen::Index n = ctx.rows().rows();
  const Eigen::Index m = ctx.rows().cols();
  std::vector<double> probs;
  if (!random_scan) {
    for (Eigen::Index i = 0; i < n; ++i) update_u(state, ctx, i, rng, probs);
    for (Eigen::Index j = 0; j < m; ++j) update_v(state, ctx, j, rng, probs);
    return;
  }
  const auto sites = static_cast<std::uint64_t>(n + m);
  for (std::uint64_t step = 0; step < sites; ++step) {
    const auto site = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(sites));
    if (site < n) {
      update_u(state, ctx, site, rng, probs);
    } else {
      update_v(state, ctx, std::min(site - n, m - 1), rng, probs);
    }
  }
}

void gibbs_sweep(ReplicaState& state, const Instance& instance, double beta, const Prior& prior_u,
                 const Prior& prior_v, Rng& rng, bool random_scan) {
  const SweepContext ctx(instance, beta, prior_u, prior_v);
  if (static_cast<Eigen::Index>(state.u.size()) != ctx.rows().rows() ||
      static_cast<Eigen::Index>(state.v.size()) != ctx.rows().cols()) {
    throw ConfigError("replica state does not match the data matrix", "state");
  }
  state.refresh(ctx.rows());
  gibbs_sweep(state, ctx, rng, random_scan);
}

ObservableStats batch_means(std::string name, const std::vector<double>& series, int n_batches) {
  ObservableStats st;
  st.name = std::move(name);
  st.n_samples = series.size();
  if (series.empty()) {
    st.reliable = false;
    return st;
  }
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : series) var += (x - mean) * (x - mean);
  st.mean = mean;
  st.variance = series.size() > 1 ? var / (n - 1.0) : 0.0;

  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(n_batches), series.size());
  const std::size_t len = series.size() / b;
  if (b < 2 || len == 0) {
    st.standard_error = std::sqrt(st.variance / n);
    st.n_effective = n;
    st.reliable = false;
    return st;
  }
  // Drop the leading remainder so every batch has the same length.
  const std::size_t offset = series.size() - b * len;
  std::vector<double> means(b, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t t = 0; t < len; ++t) means[k] += series[offset + k * len + t];
    means[k] /= static_cast<double>(len);
  }
  double bm = 0.0;
  for (double x : means) bm += x;
  bm /= static_cast<double>(b);
  double bv = 0.0;
  for (double x : means) bv += (x - bm) * (x - bm);
  bv /= static_cast<double>(b - 1);
  st.standard_error = std::sqrt(bv / static_cast<double>(b));
  st.n_effective = st.standard_error > 0.0 ? st.variance / (st.standard_error * st.standard_error)
                                           : n;
  st.n_effective = std::min(st.n_effective, n);
  st.reliable = st.n_effective >= 50.0;
  return st;
}

const ObservableStats& OverlapStats::at(const std::string& name) const {
  for (const auto& o : observables) {
    if (o.name == name) return o;
  }
  throw ConfigError("no observable named '" + name + "'", "observable");
}

bool OverlapStats::has(const std::string& name) const {
  return std::any_of(observables.begin(), observables.end(),
                     [&](const ObservableStats& o) { return o.name == name; });
}

bool OverlapStats::reliable() const {
  return std::all_of(observables.begin(), observables.end(),
                     [](const ObservableStats& o) { return o.reliable; });
}

nlohmann::json OverlapStats::to_json() const {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : observables) {
    obs.push_back({{"name", o.name},
                   {"mean", o.mean},
                   {"variance", o.variance},
                   {"standard_error", o.standard_error},
                   {"n_effective", o.n_effective},
                   {"n_samples", o.n_samples},
                   {"reliable", o.reliable}});
  }
  return {{"config", config.to_json()},
          {"observables", obs},
          {"bound_violations", bound_violations}};
}

OverlapStats estimate_overlaps(const Instance& instance, double beta, const Prior& prior_u,
                               const Prior& prior_v, const ChainConfig& cfg) {
  cfg.validate();
  const SweepContext ctx(instance, beta, prior_u, prior_v);
  const int reps = cfg.n_replicas;
  const double n = instance.n_rows();
  const bool star = instance.planted.has_value();

  std::vector<Rng> rngs;
  std::vector<ReplicaState> states;
  for (int r = 0; r < reps; ++r) {
    rngs.emplace_back(derive_seed(cfg.seed, 0x6d636d63, static_cast<std::uint64_t>(r)));
    states.push_back(random_state(ctx, rngs.back()));
  }

  const double ku2 = prior_u.support_radius() * prior_u.support_radius();
  const double rv_bound = instance.alpha() * prior_v.support_radius() * prior_v.support_radius();
  const double slack = 1e-12;

  std::vector<std::string> names = {"Ru12", "Rv12", "Ru12^2", "Rv12^2", "Ru12^4", "Rv12^4", "Ru12*Rv12"};
  if (star) {
    for (const char* s : {"Ru1*", "Rv1*", "Ru1*^2", "Rv1*^2", "Ru1**Rv1*"}) names.emplace_back(s);
  }
  std::vector<std::vector<double>> series(names.size());

  OverlapStats out;
  out.config = cfg;
  const double pairs = reps * (reps - 1) / 2.0;
  for (int sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
    for (int r = 0; r < reps; ++r) {
      gibbs_sweep(states[static_cast<std::size_t>(r)], ctx, rngs[static_cast<std::size_t>(r)],
                  cfg.random_scan);
    }
    if (sweep < cfg.burn_in || (sweep - cfg.burn_in) % cfg.thinning != 0) continue;

    std::vector<double> acc(names.size(), 0.0);
    for (int a = 0; a < reps; ++a) {
      const auto& sa = states[static_cast<std::size_t>(a)];
      for (int b = a + 1; b < reps; ++b) {
        const auto& sb = states[static_cast<std::size_t>(b)];
        double ru = 0.0, rv = 0.0;
        for (std::size_t i = 0; i < sa.u.size(); ++i) ru += sa.u[i] * sb.u[i];
        for (std::size_t j = 0; j < sa.v.size(); ++j) rv += sa.v[j] * sb.v[j];
        ru /= n;
        rv /= n;
        if (std::abs(ru) > ku2 + slack || std::abs(rv) > rv_bound + slack) ++out.bound_violations;
        const double ru2 = ru * ru, rv2 = rv * rv;
        acc[0] += ru;
        acc[1] += rv;
        acc[2] += ru2;
        acc[3] += rv2;
        acc[4] += ru2 * ru2;
        acc[5] += rv2 * rv2;
        acc[6] += ru * rv;
      }
    }
    for (std::size_t k = 0; k < 7; ++k) acc[k] /= pairs;
    if (star) {
      for (const auto& s : states) {
        double ru = 0.0, rv = 0.0;
        for (std::size_t i = 0; i < s.u.size(); ++i) ru += s.u[i] * instance.planted->u[i];
        for (std::size_t j = 0; j < s.v.size(); ++j) rv += s.v[j] * instance.planted->v[j];
        ru /= n;
        rv /= n;
        acc[7] += ru;
        acc[8] += rv;
        acc[9] += ru * ru;
        acc[10] += rv * rv;
        acc[11] += ru * rv;
      }
      for (std::size_t k = 7; k < 12; ++k) acc[k] /= reps;
    }
    for (std::size_t k = 0; k < names.size(); ++k) series[k].push_back(acc[k]);
  }

  for (std::size_t k = 0; k < names.size(); ++k) {
    out.observables.push_back(batch_means(names[k], series[k], cfg.n_batches));
  }
  return out;
}

}  // namespace spiked
