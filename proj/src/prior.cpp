#include "spiked/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spiked/errors.hpp"

namespace spiked {

namespace {

constexpr double kSymmetryTol = 1e-12;

double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

Prior Prior::rademacher() {
  Prior p = standardize({-1.0, 1.0}, {0.5, 0.5});
  p.family_ = PriorFamily::Rademacher;
  return p;
}

Prior Prior::sparse_rademacher(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw ConfigError("sparsity must lie in (0, 1], got " + std::to_string(rho), "rho");
  }
  const double a = 1.0 / std::sqrt(rho);
  Prior p;
  // Exact construction; standardize() would perturb the atoms by rounding.
  if (rho < 1.0) {
    p.atoms_ = {-a, 0.0, a};
    p.weights_ = {rho / 2, 1.0 - rho, rho / 2};
  } else {
    p.atoms_ = {-1.0, 1.0};
    p.weights_ = {0.5, 0.5};
  }
  p.family_ = PriorFamily::SparseRademacher;
  p.rho_ = rho;
  p.finalize();
  return p;
}

Prior Prior::gaussian() {
  Prior p;
  p.family_ = PriorFamily::GaussianRsOnly;
  p.radius_ = std::numeric_limits<double>::infinity();
  p.symmetric_ = true;
  return p;
}

void Prior::finalize() {
  radius_ = 0.0;
  for (double a : atoms_) radius_ = std::max(radius_, std::abs(a));
  symmetric_ = true;
  const std::size_t k = atoms_.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = k - 1 - i;
    if (std::abs(atoms_[i] + atoms_[j]) > kSymmetryTol ||
        std::abs(weights_[i] - weights_[j]) > kSymmetryTol) {
      symmetric_ = false;
      break;
    }
  }
}

void Prior::require_bounded(const std::string& context) const {
  if (!bounded()) {
    throw ConfigError("the Gaussian prior is only supported by the replica-symmetric solver",
                      context);
  }
}

std::string Prior::name() const {
  switch (family_) {
    case PriorFamily::Rademacher: return "rademacher";
    case PriorFamily::SparseRademacher: return "sparse_rademacher(" + std::to_string(rho_) + ")";
    case PriorFamily::GaussianRsOnly: return "gaussian_rs_only";
    case PriorFamily::Custom: break;
  }
  return "custom";
}

nlohmann::json Prior::to_json() const {
  nlohmann::json j;
  switch (family_) {
    case PriorFamily::Rademacher: j["family"] = "rademacher"; break;
    case PriorFamily::SparseRademacher:
      j["family"] = "sparse_rademacher";
      j["rho"] = rho_;
      break;
    case PriorFamily::GaussianRsOnly: j["family"] = "gaussian_rs_only"; break;
    case PriorFamily::Custom:
      j["family"] = "custom";
      j["atoms"] = atoms_;
      j["weights"] = weights_;
      break;
  }
  return j;
}

Prior standardize(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.size() != weights.size()) {
    throw ConfigError("atoms and weights differ in length", "atoms");
  }
  std::vector<std::pair<double, double>> pts;
  double total = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (!std::isfinite(atoms[k]) || !std::isfinite(weights[k]) || weights[k] < 0.0) {
      throw ConfigError("atoms must be finite and weights nonnegative", "weights");
    }
    if (weights[k] > 0.0) {
      pts.emplace_back(atoms[k], weights[k]);
      total += weights[k];
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& [a, w] : pts) {
    if (!merged.empty() && merged.back().first == a) {
      merged.back().second += w;
    } else {
      merged.emplace_back(a, w);
    }
  }
  if (merged.size() < 2) {
    throw ConfigError("prior needs at least two distinct atoms with positive weight", "atoms");
  }

  double mean = 0.0;
  for (const auto& [a, w] : merged) mean += w / total * a;
  double var = 0.0;
  for (const auto& [a, w] : merged) var += w / total * (a - mean) * (a - mean);
  if (!(var > 0.0)) throw ConfigError("degenerate law (zero variance)", "atoms");
  const double sd = std::sqrt(var);

  Prior p;
  for (const auto& [a, w] : merged) {
    p.atoms_.push_back((a - mean) / sd);
    p.weights_.push_back(w / total);
  }
  p.family_ = PriorFamily::Custom;
  p.finalize();
  return p;
}

Prior make_prior(const PriorSpec& spec) {
  switch (spec.family) {
    case PriorFamily::Rademacher: return Prior::rademacher();
    case PriorFamily::SparseRademacher: return Prior::sparse_rademacher(spec.rho);
    case PriorFamily::GaussianRsOnly: return Prior::gaussian();
    case PriorFamily::Custom: break;
  }
  std::vector<double> weights = spec.weights;
  if (weights.empty()) {
    // Two atoms of opposite sign admit exactly one mean-zero weighting.
    if (spec.atoms.size() != 2 || !(spec.atoms[0] * spec.atoms[1] < 0.0)) {
      throw ConfigError("weights may be omitted only for two atoms of opposite sign", "weights");
    }
    const double a = spec.atoms[0], b = spec.atoms[1];
    weights = {b / (b - a), -a / (b - a)};
  }
  return standardize(spec.atoms, weights);
}

PriorSpec parse_prior_spec(const nlohmann::json& j) {
  if (j.is_string()) return parse_prior_spec(j.get<std::string>());
  if (!j.is_object() || !j.contains("family")) {
    throw ConfigError("prior must be an object with a \"family\" field", "family");
  }
  PriorSpec spec;
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "rademacher") {
    spec.family = PriorFamily::Rademacher;
  } else if (fam == "sparse_rademacher") {
    spec.family = PriorFamily::SparseRademacher;
    if (!j.contains("rho")) throw ConfigError("sparse_rademacher requires rho", "rho");
    spec.rho = j.at("rho").get<double>();
    if (!(spec.rho > 0.0 && spec.rho <= 1.0)) throw ConfigError("must lie in (0, 1]", "rho");
  } else if (fam == "custom") {
    spec.family = PriorFamily::Custom;
    if (!j.contains("atoms")) throw ConfigError("custom prior requires atoms", "atoms");
    spec.atoms = j.at("atoms").get<std::vector<double>>();
    if (j.contains("weights")) spec.weights = j.at("weights").get<std::vector<double>>();
  } else if (fam == "gaussian_rs_only" || fam == "gaussian") {
    spec.family = PriorFamily::GaussianRsOnly;
  } else {
    throw ConfigError("unknown prior family '" + fam + "'", "family");
  }
  return spec;
}

PriorSpec parse_prior_spec(const std::string& text) {
  if (!text.empty() && text.front() == '{') return parse_prior_spec(nlohmann::json::parse(text));
  const auto colon = text.find(':');
  const std::string fam = text.substr(0, colon);
  nlohmann::json j{{"family", fam}};
  if (colon != std::string::npos) {
    try {
      j["rho"] = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse sparsity in '" + text + "'", "rho");
    }
  }
  return parse_prior_spec(j);
}

nlohmann::json to_json(const PriorSpec& spec) {
  switch (spec.family) {
    case PriorFamily::Rademacher: return {{"family", "rademacher"}};
    case PriorFamily::SparseRademacher: return {{"family", "sparse_rademacher"}, {"rho", spec.rho}};
    case PriorFamily::GaussianRsOnly: return {{"family", "gaussian_rs_only"}};
    case PriorFamily::Custom: break;
  }
  nlohmann::json j{{"family", "custom"}, {"atoms", spec.atoms}};
  if (!spec.weights.empty()) j["weights"] = spec.weights;
  return j;
}

std::size_t sample_index(const Prior& prior, Rng& rng) {
  const auto w = prior.weights();
  double u = rng.uniform();
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    if (u < w[k]) return k;
    u -= w[k];
  }
  return w.size() - 1;
}

std::vector<double> sample(const Prior& prior, std::size_t count, Rng& rng) {
  prior.require_bounded("prior");
  std::vector<double> out(count);
  const auto a = prior.atoms();
  for (auto& x : out) x = a[sample_index(prior, rng)];
  return out;
}

Moments moments(const Prior& prior) {
  Moments m;
  if (!prior.bounded()) {
    m.variance = 1.0;
    m.support_radius = prior.support_radius();
    m.fourth_moment = 3.0;
    return m;
  }
  const auto a = prior.atoms();
  const auto w = prior.weights();
  for (std::size_t k = 0; k < a.size(); ++k) m.mean += w[k] * a[k];
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - m.mean;
    m.variance += w[k] * d * d;
    m.fourth_moment += w[k] * a[k] * a[k] * a[k] * a[k];
  }
  m.support_radius = prior.support_radius();
  return m;
}

double subgaussian_diagnostic(const Prior& prior) {
  prior.require_bounded("prior");
  const auto a = prior.atoms();
  const auto w = prior.weights();
  std::vector<double> terms(a.size());
  double best = 0.0;
  for (int step = 1; step <= 100; ++step) {
    const double lambda = 0.1 * step;
    for (std::size_t k = 0; k < a.size(); ++k) terms[k] = std::log(w[k]) + lambda * a[k];
    const double cgf = log_sum_exp(terms);
    best = std::max(best, std::sqrt(std::max(0.0, 2.0 * cgf) / (lambda * lambda)));
  }
  return best;
}

}  // namespace spiked
