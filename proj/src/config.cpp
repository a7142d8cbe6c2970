#include "spiked/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "spiked/errors.hpp"

namespace spiked {

namespace {

template <class T>
T field(const nlohmann::json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value: ") + e.what(), name);
  }
}

}  // namespace

int ExperimentConfig::resolve_m(const SizeSpec& s) const {
  if (s.m > 0) return s.m;
  return std::max(1, static_cast<int>(std::lround(alpha * s.n)));
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("must be finite and > 0", "alpha");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("must be finite and >= 0", "beta");
  if (sizes.empty()) throw ConfigError("at least one size is required", "sizes");
  for (const auto& s : sizes) {
    if (s.n < 1 || s.m < 0) throw ConfigError("n must be >= 1 and m >= 0", "sizes");
  }
  if (samples < 1) throw ConfigError("must be >= 1", "samples");
  if (mcmc.replicas < 2) throw ConfigError("must be >= 2", "mcmc.replicas");
  if (mcmc.burn_in < 0 || mcmc.burn_in >= mcmc.sweeps) {
    throw ConfigError("burn_in must be in [0, sweeps)", "mcmc.burn_in");
  }
  if (mcmc.thinning < 1) throw ConfigError("must be >= 1", "mcmc.thinning");
  if (quad_nodes < 2) throw ConfigError("must be >= 2", "quad_nodes");
  if (instances < 1) throw ConfigError("must be >= 1", "instances");
  if (calibration < 10) throw ConfigError("must be >= 10", "calibration");
  if (!(delta_beta > 0.0)) throw ConfigError("must be > 0", "delta_beta");
  if (!(tol > 0.0)) throw ConfigError("must be > 0", "tol");
  if (format != "csv" && format != "binary") throw ConfigError("expected csv or binary", "format");
  if (hypothesis != "null" && hypothesis != "spiked") {
    throw ConfigError("expected null or spiked", "hypothesis");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json sz = nlohmann::json::array();
  for (const auto& s : sizes) sz.push_back({{"n", s.n}, {"m", resolve_m(s)}});
  return {{"alpha", alpha},
          {"beta", beta},
          {"prior_u", spiked::to_json(prior_u)},
          {"prior_v", spiked::to_json(prior_v)},
          {"sizes", sz},
          {"samples", samples},
          {"seed", seed},
          {"engine", engine == Engine::Exact ? "exact" : "mcmc"},
          {"s_grid", s_grid},
          {"mcmc",
           {{"replicas", mcmc.replicas},
            {"sweeps", mcmc.sweeps},
            {"burn_in", mcmc.burn_in},
            {"thinning", mcmc.thinning}}},
          {"quad_nodes", quad_nodes},
          {"threads", threads},
          {"out", out},
          {"alpha_grid", alpha_grid},
          {"tol", tol},
          {"instances", instances},
          {"calibration", calibration},
          {"beta_above", beta_above},
          {"beta_below", beta_below},
          {"delta_beta", delta_beta},
          {"hypothesis", hypothesis},
          {"format", format},
          {"input", input},
          {"max_v_configs", max_v_configs}};
}

ExperimentConfig merge_config(const ExperimentConfig& base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object", "config");
  static const std::set<std::string> known = {
      "alpha",      "beta",       "prior_u",    "prior_v",     "sizes",      "samples",
      "seed",       "engine",     "s_grid",     "mcmc",        "quad_nodes", "threads",
      "out",        "alpha_grid", "tol",        "instances",   "calibration", "beta_above",
      "beta_below", "delta_beta", "hypothesis", "format",      "input",      "max_v_configs",
      "schema_version"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config field", k);
  }
  ExperimentConfig c = base;
  if (j.contains("alpha")) c.alpha = field<double>(j, "alpha");
  if (j.contains("beta")) c.beta = field<double>(j, "beta");
  if (j.contains("prior_u")) c.prior_u = parse_prior_spec(j["prior_u"]);
  if (j.contains("prior_v")) c.prior_v = parse_prior_spec(j["prior_v"]);
  if (j.contains("sizes")) {
    c.sizes.clear();
    for (const auto& s : j["sizes"]) {
      SizeSpec sz;
      if (s.is_number_integer()) {
        sz.n = s.get<int>();
      } else {
        sz.n = field<int>(s, "n");
        if (s.contains("m")) sz.m = field<int>(s, "m");
      }
      c.sizes.push_back(sz);
    }
  }
  if (j.contains("samples")) c.samples = field<int>(j, "samples");
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("engine")) {
    const auto e = field<std::string>(j, "engine");
    if (e == "exact") {
      c.engine = Engine::Exact;
    } else if (e == "mcmc") {
      c.engine = Engine::Mcmc;
    } else {
      throw ConfigError("expected exact or mcmc", "engine");
    }
  }
  if (j.contains("s_grid")) c.s_grid = field<std::vector<double>>(j, "s_grid");
  if (j.contains("mcmc")) {
    const auto& m = j["mcmc"];
    for (const auto& [k, v] : m.items()) {
      if (k != "replicas" && k != "sweeps" && k != "burn_in" && k != "thinning") {
        throw ConfigError("unknown config field", "mcmc." + k);
      }
    }
    if (m.contains("replicas")) c.mcmc.replicas = field<int>(m, "replicas");
    if (m.contains("sweeps")) c.mcmc.sweeps = field<int>(m, "sweeps");
    if (m.contains("burn_in")) c.mcmc.burn_in = field<int>(m, "burn_in");
    if (m.contains("thinning")) c.mcmc.thinning = field<int>(m, "thinning");
  }
  if (j.contains("quad_nodes")) c.quad_nodes = field<int>(j, "quad_nodes");
  if (j.contains("threads")) c.threads = field<int>(j, "threads");
  if (j.contains("out")) c.out = field<std::string>(j, "out");
  if (j.contains("alpha_grid")) c.alpha_grid = field<std::vector<double>>(j, "alpha_grid");
  if (j.contains("tol")) c.tol = field<double>(j, "tol");
  if (j.contains("instances")) c.instances = field<int>(j, "instances");
  if (j.contains("calibration")) c.calibration = field<int>(j, "calibration");
  if (j.contains("beta_above")) c.beta_above = field<double>(j, "beta_above");
  if (j.contains("beta_below")) c.beta_below = field<double>(j, "beta_below");
  if (j.contains("delta_beta")) c.delta_beta = field<double>(j, "delta_beta");
  if (j.contains("hypothesis")) c.hypothesis = field<std::string>(j, "hypothesis");
  if (j.contains("format")) c.format = field<std::string>(j, "format");
  if (j.contains("input")) c.input = field<std::string>(j, "input");
  if (j.contains("max_v_configs")) c.max_v_configs = field<std::uint64_t>(j, "max_v_configs");
  return c;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", "config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), "config");
  }
  return merge_config(base, j);
}

std::vector<std::pair<std::string, std::string>> config_field_defaults() {
  const nlohmann::json d = ExperimentConfig{}.to_json();
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, v] : d.items()) out.emplace_back(k, v.dump());
  return out;
}

}  // namespace spiked
