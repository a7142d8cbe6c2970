#include "spiked/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "spiked/errors.hpp"
#include "spiked/parallel.hpp"
#include "spiked/spectral.hpp"

namespace spiked {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags keep the experiments' random streams disjoint.
constexpr std::uint64_t kTagNishimori = 0x4e495348;
constexpr std::uint64_t kTagDerivative = 0x44455256;
constexpr std::uint64_t kTagOverlaps = 0x4f564c50;
constexpr std::uint64_t kTagValidate = 0x56414c44;
constexpr std::uint64_t kTagSpecCal = 0x53504543;
constexpr std::uint64_t kTagSpecNull = 0x53504e4c;
constexpr std::uint64_t kTagSpecAbove = 0x53504142;
constexpr std::uint64_t kTagSpecBelow = 0x5350424c;

std::uint64_t shape_key(int n, int m) {
  return (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint32_t>(m);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
  MeanSe r;
  if (x.empty()) return {kNaN, kNaN};
  const double n = static_cast<double>(x.size());
  for (double v : x) r.mean += v;
  r.mean /= n;
  if (x.size() < 2) return {r.mean, kNaN};
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json complex_json(const std::vector<std::complex<double>>& z) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : z) a.push_back({{"re", c.real()}, {"im", c.imag()}});
  return a;
}

// JSON has no NaN; absent values become null.
nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExactOptions exact_options(const ExperimentConfig& cfg) {
  ExactOptions o;
  o.max_v_configs = cfg.max_v_configs;
  return o;
}

HypothesisSamples draw_log_lr(const ExperimentConfig& cfg, int n, int m, Hypothesis h,
                              const Prior& pu, const Prior& pv, const LrAsymptotics& pred) {
  HypothesisSamples hs;
  hs.hypothesis = h;
  const auto count = static_cast<std::size_t>(cfg.samples);
  hs.log_lr.resize(count);
  hs.seeds.resize(count);
  const ModelParams params{n, m, cfg.beta};
  const ExactOptions opts = exact_options(cfg);
  // Fail fast on capacity before spawning workers.
  {
    const std::uint64_t seed = sample_seed(cfg.seed, h, n, m, 0);
    const Instance inst = generate(params, h, pu, pv, seed);
    hs.seeds[0] = seed;
    hs.log_lr[0] = exact_log_lr(inst, cfg.beta, pu, pv, opts).value;
  }
  parallel_for(count - 1, cfg.threads, [&](std::size_t k0) {
    const std::size_t k = k0 + 1;
    const std::uint64_t seed = sample_seed(cfg.seed, h, n, m, k);
    const Instance inst = generate(params, h, pu, pv, seed);
    hs.seeds[k] = seed;
    hs.log_lr[k] = exact_log_lr(inst, cfg.beta, pu, pv, opts).value;
  });

  if (count >= 2) {
    if (pred.valid) {
      hs.summary = summarize(hs.log_lr, h == Hypothesis::Null ? pred.mean_null : pred.mean_alt,
                             pred.variance);
    } else {
      const EcdfSummary tmp = summarize(hs.log_lr, 0.0, 1.0);
      hs.summary = summarize(hs.log_lr, tmp.mean, tmp.variance);
    }
  }
  for (double s : cfg.s_grid) {
    std::complex<double> acc = 0.0;
    for (double x : hs.log_lr) acc += std::exp(std::complex<double>(0.0, s * x));
    acc /= static_cast<double>(count);
    hs.char_fn.push_back(acc);
    hs.char_fn_se.push_back(std::sqrt(std::max(0.0, 1.0 - std::norm(acc)) / static_cast<double>(count)));
  }
  return hs;
}

nlohmann::json hypothesis_json(const HypothesisSamples& hs) {
  const auto& s = hs.summary;
  return {{"hypothesis", to_string(hs.hypothesis)},
          {"n_samples", hs.log_lr.size()},
          {"mean", s.mean},
          {"variance", s.variance},
          {"se_mean", s.se_mean},
          {"se_variance", s.se_variance},
          {"ks_distance", s.ks_distance},
          {"reference", {{"mean", num(s.ref_mean)}, {"variance", num(s.ref_variance)}}},
          {"degenerate_reference", s.degenerate_reference},
          {"char_fn", complex_json(hs.char_fn)},
          {"char_fn_se", hs.char_fn_se},
          {"log_lr", hs.log_lr},
          {"seeds", hs.seeds}};
}

Prior prior_or_throw(const PriorSpec& spec, const char* fieldname) {
  try {
    return make_prior(spec);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), fieldname);
  }
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t master, Hypothesis h, int n, int m, std::uint64_t index) {
  return derive_seed(master, h == Hypothesis::Null ? 0 : 1, shape_key(n, m), index);
}

std::string regime(double alpha, double beta, const Prior& prior_u, const Prior& prior_v) {
  const double ab2 = alpha * beta * beta;
  if (!(ab2 < 1.0)) return "above_bbp";
  const double ku = prior_u.support_radius(), kv = prior_v.support_radius();
  const double k8 = ku * ku * ku * ku * kv * kv * kv * kv;
  return k8 * ab2 < 1.0 ? "proven" : "conjectured";
}

nlohmann::json LrTestError::to_json() const {
  return {{"type1", type1},           {"type2", type2},       {"empirical_err", empirical_err},
          {"se_type1", se_type1},     {"se_type2", se_type2}, {"se_err", se_err},
          {"predicted_err", num(predicted_err)},
          {"tie_convention", "log L = 0 counts as accepting the null"},
          {"degenerate_ties", degenerate_ties}};
}

LrTestError lr_test_error(const HypothesisSamples& null_samples, const HypothesisSamples& alt_samples,
                          double alpha, double beta) {
  LrTestError e;
  const double n0 = static_cast<double>(null_samples.log_lr.size());
  const double n1 = static_cast<double>(alt_samples.log_lr.size());
  if (n0 < 1 || n1 < 1) throw ConfigError("need samples under both hypotheses", "samples");
  double t1 = 0, t2 = 0;
  bool all_zero = true;
  for (double x : null_samples.log_lr) {
    t1 += x > 0.0;
    all_zero = all_zero && x == 0.0;
  }
  for (double x : alt_samples.log_lr) {
    t2 += x <= 0.0;
    all_zero = all_zero && x == 0.0;
  }
  e.type1 = t1 / n0;
  e.type2 = t2 / n1;
  e.empirical_err = e.type1 + e.type2;
  e.se_type1 = std::sqrt(e.type1 * (1 - e.type1) / n0);
  e.se_type2 = std::sqrt(e.type2 * (1 - e.type2) / n1);
  e.se_err = std::hypot(e.se_type1, e.se_type2);
  e.degenerate_ties = all_zero;
  const double ab2 = alpha * beta * beta;
  e.predicted_err = ab2 < 1.0 ? optimal_error(alpha, beta) : kNaN;
  return e;
}

FluctuationReport fluctuation_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.engine != Engine::Exact) {
    throw ConfigError("log-likelihood-ratio experiments need the exact engine", "engine");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  pu.require_bounded("prior_u");
  pv.require_bounded("prior_v");

  FluctuationReport rep;
  rep.config = cfg;
  rep.predicted = lr_asymptotics(cfg.alpha, cfg.beta);
  rep.regime = regime(cfg.alpha, cfg.beta, pu, pv);
  for (const auto& sz : cfg.sizes) {
    SizeResult r;
    r.n = sz.n;
    r.m = cfg.resolve_m(sz);
    r.null_samples = draw_log_lr(cfg, r.n, r.m, Hypothesis::Null, pu, pv, rep.predicted);
    r.alt_samples = draw_log_lr(cfg, r.n, r.m, Hypothesis::Spiked, pu, pv, rep.predicted);
    for (std::size_t k = 0; k < cfg.s_grid.size(); ++k) {
      if (rep.predicted.valid) {
        const auto phi = char_fn(cfg.s_grid[k], cfg.alpha, cfg.beta, Hypothesis::Spiked);
        r.char_fn_predicted.push_back(phi);
        r.char_fn_distance.push_back(std::abs(r.alt_samples.char_fn[k] - phi));
      } else {
        r.char_fn_predicted.emplace_back(kNaN, kNaN);
        r.char_fn_distance.push_back(kNaN);
      }
    }
    r.test_error = lr_test_error(r.null_samples, r.alt_samples, cfg.alpha, cfg.beta);
    r.sign_gap = r.null_samples.summary.mean + r.alt_samples.summary.mean;
    r.sign_gap_se = std::hypot(r.null_samples.summary.se_mean, r.alt_samples.summary.se_mean);
    const double ku = pu.support_radius(), kv = pv.support_radius();
    r.poincare_bound = cfg.beta * r.n * cfg.alpha * ku * ku * kv * kv;
    rep.sizes.push_back(std::move(r));
  }
  rep.runtime_seconds = seconds_since(t0);
  return rep;
}

nlohmann::json FluctuationReport::to_json() const {
  nlohmann::json sizes_json = nlohmann::json::array();
  for (const auto& r : sizes) {
    sizes_json.push_back({{"n", r.n},
                          {"m", r.m},
                          {"null", hypothesis_json(r.null_samples)},
                          {"alternative", hypothesis_json(r.alt_samples)},
                          {"s_grid", config.s_grid},
                          {"char_fn_predicted", complex_json(r.char_fn_predicted)},
                          {"char_fn_distance", r.char_fn_distance},
                          {"test_error", r.test_error.to_json()},
                          {"sign_gap", r.sign_gap},
                          {"sign_gap_se", r.sign_gap_se},
                          {"poincare_bound", r.poincare_bound}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", "fluctuations"},
          {"config", config.to_json()},
          {"predicted",
           {{"mean_null", num(predicted.mean_null)},
            {"mean_alt", num(predicted.mean_alt)},
            {"variance", num(predicted.variance)},
            {"valid", predicted.valid}}},
          {"regime", regime},
          {"sizes", sizes_json},
          {"runtime_seconds", runtime_seconds}};
}

std::string FluctuationReport::samples_csv() const {
  std::ostringstream out;
  out << "hypothesis,sample_index,N,M,beta,seed,log_lr\n";
  for (const auto& r : sizes) {
    for (const HypothesisSamples* hs : {&r.null_samples, &r.alt_samples}) {
      for (std::size_t k = 0; k < hs->log_lr.size(); ++k) {
        out << to_string(hs->hypothesis) << ',' << k << ',' << r.n << ',' << r.m << ','
            << fmt17(config.beta) << ',' << hs->seeds[k] << ',' << fmt17(hs->log_lr[k]) << '\n';
      }
    }
  }
  return out.str();
}

std::vector<LrTestError> lr_test_error(const ExperimentConfig& cfg) {
  const FluctuationReport rep = fluctuation_experiment(cfg);
  std::vector<LrTestError> out;
  for (const auto& r : rep.sizes) out.push_back(r.test_error);
  return out;
}

nlohmann::json KlReport::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"n", p.n}, {"m", p.m}, {"empirical_mean", p.empirical_mean}, {"se", p.se}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", "kl"},
          {"predicted", num(predicted)},
          {"points", pts}};
}

KlReport kl_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.engine != Engine::Exact) {
    throw ConfigError("log-likelihood-ratio experiments need the exact engine", "engine");
  }
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  pu.require_bounded("prior_u");
  pv.require_bounded("prior_v");
  const LrAsymptotics pred = lr_asymptotics(cfg.alpha, cfg.beta);
  KlReport rep;
  rep.predicted = pred.valid ? pred.mean_alt : kNaN;
  for (const auto& sz : cfg.sizes) {
    const int m = cfg.resolve_m(sz);
    const HypothesisSamples hs = draw_log_lr(cfg, sz.n, m, Hypothesis::Spiked, pu, pv, pred);
    const MeanSe ms = mean_se(hs.log_lr);
    rep.points.push_back({sz.n, m, ms.mean, ms.se});
  }
  return rep;
}

nlohmann::json NishimoriReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : comparisons) {
    rows.push_back({{"observable", c.observable},
                    {"replica_mean", c.replica_mean},
                    {"star_mean", c.star_mean},
                    {"replica_se", c.replica_se},
                    {"star_se", c.star_se},
                    {"diff_se", c.diff_se},
                    {"z", c.z()}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", "nishimori"},
          {"n", n},
          {"m", m},
          {"draws", draws},
          {"comparisons", rows}};
}

NishimoriReport nishimori_check(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  NishimoriReport rep;
  rep.n = cfg.sizes.front().n;
  rep.m = cfg.resolve_m(cfg.sizes.front());
  rep.draws = static_cast<std::size_t>(cfg.samples);
  const ModelParams params{rep.n, rep.m, cfg.beta};

  using Partner = OverlapObservable::Partner;
  const std::vector<std::pair<std::string, std::pair<int, int>>> moments = {
      {"Ru^2", {2, 0}}, {"Rv^2", {0, 2}}, {"Ru*Rv", {1, 1}}};
  // values[k][2*o] = replica side, values[k][2*o+1] = star side
  std::vector<std::vector<double>> values(rep.draws, std::vector<double>(2 * moments.size()));

  if (cfg.engine == Engine::Exact) {
    const ExactOptions opts = exact_options(cfg);
    // Capacity check up front.
    (void)JointPosterior(generate(params, Hypothesis::Spiked, pu, pv, 0), cfg.beta, pu, pv,
                         opts.max_joint_evaluations);
    parallel_for(rep.draws, cfg.threads, [&](std::size_t k) {
      const Instance inst = generate(params, Hypothesis::Spiked, pu, pv,
                                     derive_seed(cfg.seed, kTagNishimori, shape_key(rep.n, rep.m), k));
      const JointPosterior post(inst, cfg.beta, pu, pv, opts.max_joint_evaluations);
      for (std::size_t o = 0; o < moments.size(); ++o) {
        const auto [p, q] = moments[o].second;
        values[k][2 * o] = gibbs_expectation(post, inst, {p, q, Partner::Replica});
        values[k][2 * o + 1] = gibbs_expectation(post, inst, {p, q, Partner::Star});
      }
    });
  } else {
    const std::vector<std::pair<const char*, const char*>> names = {
        {"Ru12^2", "Ru1*^2"}, {"Rv12^2", "Rv1*^2"}, {"Ru12*Rv12", "Ru1**Rv1*"}};
    parallel_for(rep.draws, cfg.threads, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(cfg.seed, kTagNishimori, shape_key(rep.n, rep.m), k);
      const Instance inst = generate(params, Hypothesis::Spiked, pu, pv, seed);
      ChainConfig cc{cfg.mcmc.replicas, cfg.mcmc.sweeps, cfg.mcmc.burn_in, cfg.mcmc.thinning,
                     derive_seed(seed, 1)};
      const OverlapStats st = estimate_overlaps(inst, cfg.beta, pu, pv, cc);
      for (std::size_t o = 0; o < names.size(); ++o) {
        values[k][2 * o] = st.at(names[o].first).mean;
        values[k][2 * o + 1] = st.at(names[o].second).mean;
      }
    });
  }

  for (std::size_t o = 0; o < moments.size(); ++o) {
    std::vector<double> a(rep.draws), b(rep.draws), d(rep.draws);
    for (std::size_t k = 0; k < rep.draws; ++k) {
      a[k] = values[k][2 * o];
      b[k] = values[k][2 * o + 1];
      d[k] = a[k] - b[k];
    }
    const MeanSe ma = mean_se(a), mb = mean_se(b), md = mean_se(d);
    rep.comparisons.push_back({moments[o].first, ma.mean, mb.mean, ma.se, mb.se, md.se});
  }
  return rep;
}

nlohmann::json DerivativeReport::to_json() const {
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", "derivative_identity"},
          {"n", n},
          {"m", m},
          {"draws", draws},
          {"delta_beta", delta_beta},
          {"fd_derivative", fd_derivative},
          {"fd_se", fd_se},
          {"overlap_rhs", overlap_rhs},
          {"rhs_se", rhs_se},
          {"gap", gap},
          {"gap_se", gap_se}};
}

DerivativeReport derivative_identity_check(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  DerivativeReport rep;
  rep.n = cfg.sizes.front().n;
  rep.m = cfg.resolve_m(cfg.sizes.front());
  rep.draws = static_cast<std::size_t>(cfg.samples);
  rep.delta_beta = cfg.delta_beta;
  const ModelParams params{rep.n, rep.m, cfg.beta};
  const ExactOptions opts = exact_options(cfg);
  const double upper = cfg.beta + cfg.delta_beta;
  const double lower = std::max(0.0, cfg.beta - cfg.delta_beta);

  std::vector<double> fd(rep.draws), rhs(rep.draws), diff(rep.draws);
  parallel_for(rep.draws, cfg.threads, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(cfg.seed, kTagDerivative, shape_key(rep.n, rep.m), k);
    Rng rng(seed);
    const SpikeDraw draw = draw_spike(params, pu, pv, rng);
    const double lp = exact_log_lr(assemble(draw, upper, seed), upper, pu, pv, opts).value;
    const double lm = exact_log_lr(assemble(draw, lower, seed), lower, pu, pv, opts).value;
    fd[k] = (lp - lm) / (upper - lower);
    const Instance mid = assemble(draw, cfg.beta, seed);
    const JointPosterior post(mid, cfg.beta, pu, pv, opts.max_joint_evaluations);
    rhs[k] = 0.5 * rep.n *
             gibbs_expectation(post, mid, {1, 1, OverlapObservable::Partner::Replica});
    diff[k] = fd[k] - rhs[k];
  });
  const MeanSe a = mean_se(fd), b = mean_se(rhs), d = mean_se(diff);
  rep.fd_derivative = a.mean;
  rep.fd_se = a.se;
  rep.overlap_rhs = b.mean;
  rep.rhs_se = b.se;
  rep.gap = d.mean;
  rep.gap_se = d.se;
  return rep;
}

bool McmcValidation::passed(double k_se) const {
  return std::all_of(rows.begin(), rows.end(), [&](const Row& r) {
    return std::abs(r.mcmc - r.exact) <= k_se * r.se;
  });
}

nlohmann::json McmcValidation::to_json() const {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows) {
    a.push_back({{"observable", r.observable}, {"exact", r.exact}, {"mcmc", r.mcmc}, {"se", r.se}});
  }
  return {{"n", n}, {"m", m}, {"rows", a}};
}

McmcValidation validate_mcmc(const ExperimentConfig& cfg, int n, int m, int sweeps) {
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  McmcValidation val;
  val.n = n;
  val.m = m;
  const std::uint64_t seed = derive_seed(cfg.seed, kTagValidate, shape_key(n, m));
  const Instance inst = generate({n, m, cfg.beta}, Hypothesis::Spiked, pu, pv, seed);
  const JointPosterior post(inst, cfg.beta, pu, pv);
  ChainConfig cc;
  cc.n_replicas = cfg.mcmc.replicas;
  cc.n_sweeps = sweeps;
  cc.burn_in = std::min(1000, sweeps / 10);
  cc.thinning = 1;
  cc.seed = derive_seed(seed, 1);
  const OverlapStats st = estimate_overlaps(inst, cfg.beta, pu, pv, cc);
  using Partner = OverlapObservable::Partner;
  const std::vector<std::pair<std::string, OverlapObservable>> checks = {
      {"Ru12^2", {2, 0, Partner::Replica}},   {"Rv12^2", {0, 2, Partner::Replica}},
      {"Ru12*Rv12", {1, 1, Partner::Replica}}, {"Ru12^4", {4, 0, Partner::Replica}},
      {"Rv12^4", {0, 4, Partner::Replica}},   {"Ru1*^2", {2, 0, Partner::Star}},
      {"Ru1**Rv1*", {1, 1, Partner::Star}}};
  for (const auto& [name, obs] : checks) {
    const auto& o = st.at(name);
    val.rows.push_back({name, gibbs_expectation(post, inst, obs), o.mean, o.standard_error});
  }
  return val;
}

nlohmann::json OverlapReport::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"n", p.n},
                   {"m", p.m},
                   {"instances", p.instances},
                   {"n_ru_rv", p.n_ru_rv},
                   {"n_ru_rv_se", p.n_ru_rv_se},
                   {"ru2", p.ru2},
                   {"ru2_se", p.ru2_se},
                   {"rv2", p.rv2},
                   {"rv2_se", p.rv2_se},
                   {"ru1star2", p.ru1s2},
                   {"ru1star2_se", p.ru1s2_se},
                   {"n2_ru4", p.n2_ru4},
                   {"n2_ru4_se", p.n2_ru4_se},
                   {"n2_rv4", p.n2_rv4},
                   {"n2_rv4_se", p.n2_rv4_se},
                   {"unreliable_chains", p.unreliable_chains},
                   {"bound_violations", p.bound_violations}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", "overlaps"},
          {"theta", num(theta)},
          {"ru2_loglog_slope", num(ru2_loglog_slope)},
          {"points", pts}};
}

OverlapReport overlap_scaling(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  OverlapReport rep;
  rep.theta = cfg.alpha * cfg.beta * cfg.beta < 1.0 ? theta(cfg.alpha, cfg.beta) : kNaN;

  for (const auto& sz : cfg.sizes) {
    OverlapPoint pt;
    pt.n = sz.n;
    pt.m = cfg.resolve_m(sz);
    pt.instances = static_cast<std::size_t>(cfg.instances);
    const ModelParams params{pt.n, pt.m, cfg.beta};
    std::vector<OverlapStats> stats(pt.instances);
    parallel_for(pt.instances, cfg.threads, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(cfg.seed, kTagOverlaps, shape_key(pt.n, pt.m), k);
      const Instance inst = generate(params, Hypothesis::Spiked, pu, pv, seed);
      ChainConfig cc{cfg.mcmc.replicas, cfg.mcmc.sweeps, cfg.mcmc.burn_in, cfg.mcmc.thinning,
                     derive_seed(seed, 1)};
      stats[k] = estimate_overlaps(inst, cfg.beta, pu, pv, cc);
    });
    auto collect = [&](const char* name, double scale) {
      std::vector<double> x;
      for (const auto& s : stats) x.push_back(scale * s.at(name).mean);
      return mean_se(x);
    };
    const double n = pt.n;
    const MeanSe a = collect("Ru12*Rv12", n), b = collect("Ru12^2", 1.0), c = collect("Rv12^2", 1.0),
                 d = collect("Ru1*^2", 1.0), e = collect("Ru12^4", n * n), f = collect("Rv12^4", n * n);
    pt.n_ru_rv = a.mean;
    pt.n_ru_rv_se = a.se;
    pt.ru2 = b.mean;
    pt.ru2_se = b.se;
    pt.rv2 = c.mean;
    pt.rv2_se = c.se;
    pt.ru1s2 = d.mean;
    pt.ru1s2_se = d.se;
    pt.n2_ru4 = e.mean;
    pt.n2_ru4_se = e.se;
    pt.n2_rv4 = f.mean;
    pt.n2_rv4_se = f.se;
    for (const auto& s : stats) {
      pt.unreliable_chains += s.reliable() ? 0 : 1;
      pt.bound_violations += s.bound_violations;
    }
    rep.points.push_back(pt);
  }

  rep.ru2_loglog_slope = kNaN;
  if (rep.points.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(rep.points.size());
    for (const auto& p : rep.points) {
      const double x = std::log(static_cast<double>(p.n)), y = std::log(p.ru2);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    rep.ru2_loglog_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  return rep;
}

double calibrate_spectral_buffer(int n, int m, int draws, std::uint64_t seed, int threads) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int, std::uint64_t>, double> cache;
  const auto key = std::make_tuple(n, m, draws, seed);
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double alpha = static_cast<double>(m) / n;
  const double edge = (1.0 + std::sqrt(alpha)) * (1.0 + std::sqrt(alpha));
  std::vector<double> excess(static_cast<std::size_t>(draws));
  parallel_for(excess.size(), threads, [&](std::size_t k) {
    Rng rng(derive_seed(seed, kTagSpecCal, shape_key(n, m), k));
    const Instance inst = generate_null({n, m, 0.0}, rng);
    excess[k] = top_singular_value_sq(inst.data) / n - edge;
  });
  std::sort(excess.begin(), excess.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(draws))) - 1;
  const double buffer = std::max(0.0, excess[std::min(idx, excess.size() - 1)]);
  std::lock_guard lock(mu);
  cache[key] = buffer;
  return buffer;
}

nlohmann::json SpectralPowerReport::to_json() const {
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", "spectral_power"},
          {"n", n},
          {"m", m},
          {"buffer", buffer},
          {"bulk_edge", bulk_edge},
          {"power_above", power_above},
          {"power_below", power_below},
          {"false_alarm", false_alarm},
          {"accuracy_below", accuracy_below},
          {"null_within_quarter", null_within_quarter}};
}

SpectralPowerReport spectral_power_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prior pu = prior_or_throw(cfg.prior_u, "prior_u");
  const Prior pv = prior_or_throw(cfg.prior_v, "prior_v");
  SpectralPowerReport rep;
  rep.n = cfg.sizes.front().n;
  rep.m = cfg.resolve_m(cfg.sizes.front());
  const double alpha = static_cast<double>(rep.m) / rep.n;
  rep.bulk_edge = (1.0 + std::sqrt(alpha)) * (1.0 + std::sqrt(alpha));
  rep.buffer = calibrate_spectral_buffer(rep.n, rep.m, cfg.calibration, cfg.seed, cfg.threads);

  const auto count = static_cast<std::size_t>(cfg.instances);
  auto run = [&](std::uint64_t tag, Hypothesis h, double beta, std::vector<double>& tops) {
    tops.resize(count);
    parallel_for(count, cfg.threads, [&](std::size_t k) {
      const Instance inst = generate({rep.n, rep.m, beta}, h, pu, pv,
                                     derive_seed(cfg.seed, tag, shape_key(rep.n, rep.m), k));
      tops[k] = spectral_detect(inst, alpha, rep.buffer).top_sv_sq_over_n;
    });
  };
  std::vector<double> null_tops, above, below;
  run(kTagSpecNull, Hypothesis::Null, 0.0, null_tops);
  run(kTagSpecAbove, Hypothesis::Spiked, cfg.beta_above, above);
  run(kTagSpecBelow, Hypothesis::Spiked, cfg.beta_below, below);

  const double threshold = rep.bulk_edge + rep.buffer;
  auto rate = [&](const std::vector<double>& t) {
    return static_cast<double>(std::count_if(t.begin(), t.end(), [&](double x) { return x > threshold; })) /
           static_cast<double>(t.size());
  };
  rep.power_above = rate(above);
  rep.power_below = rate(below);
  rep.false_alarm = rate(null_tops);
  rep.accuracy_below = 0.5 * (1.0 - rep.false_alarm + rep.power_below);
  rep.null_within_quarter =
      static_cast<double>(std::count_if(null_tops.begin(), null_tops.end(), [&](double x) {
        return std::abs(x - rep.bulk_edge) <= 0.25;
      })) /
      static_cast<double>(count);
  return rep;
}

}  // namespace spiked
