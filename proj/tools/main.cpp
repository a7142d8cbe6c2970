// Command-line front end for the spiked-model experiments.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spiked/config.hpp"
#include "spiked/errors.hpp"
#include "spiked/exact.hpp"
#include "spiked/harness.hpp"
#include "spiked/model.hpp"
#include "spiked/rs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spiked;

namespace {

// Raw flag values, keyed by flag name; converted after parsing so that every
// field goes through the same validation as a config file.
struct Flags {
  std::map<std::string, std::string> values;
  std::string config_path;
};

const char* const kScalarFlags[][3] = {
    // flag, config field, kind (d = double, i = integer, s = string, p = prior)
    {"alpha", "alpha", "d"},
    {"beta", "beta", "d"},
    {"prior-u", "prior_u", "p"},
    {"prior-v", "prior_v", "p"},
    {"samples", "samples", "i"},
    {"seed", "seed", "i"},
    {"engine", "engine", "s"},
    {"quad-nodes", "quad_nodes", "i"},
    {"threads", "threads", "i"},
    {"out", "out", "s"},
    {"tol", "tol", "d"},
    {"instances", "instances", "i"},
    {"calibration", "calibration", "i"},
    {"beta-above", "beta_above", "d"},
    {"beta-below", "beta_below", "d"},
    {"delta-beta", "delta_beta", "d"},
    {"hypothesis", "hypothesis", "s"},
    {"format", "format", "s"},
    {"input", "input", "s"},
    {"max-v-configs", "max_v_configs", "i"},
};

const char* const kMcmcFlags[][2] = {
    {"replicas", "replicas"}, {"sweeps", "sweeps"}, {"burn-in", "burn_in"}, {"thinning", "thinning"}};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& text, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + text + "'", field);
  }
}

long long to_integer(const std::string& text, const std::string& field) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + text + "'", field);
  }
}

json number_list(const std::string& text, const std::string& field) {
  json a = json::array();
  for (const auto& item : split(text, ',')) a.push_back(to_double(item, field));
  return a;
}

// "16", "8,16" or "16x32,32x64".
json size_list(const std::string& text) {
  json a = json::array();
  for (const auto& item : split(text, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) {
      a.push_back({{"n", to_integer(item, "sizes")}});
    } else {
      a.push_back({{"n", to_integer(item.substr(0, x), "sizes")},
                   {"m", to_integer(item.substr(x + 1), "sizes")}});
    }
  }
  return a;
}

json flags_to_json(const Flags& f) {
  json j = json::object();
  const auto& v = f.values;
  for (const auto& row : kScalarFlags) {
    auto it = v.find(row[0]);
    if (it == v.end()) continue;
    const std::string field = row[1];
    switch (row[2][0]) {
      case 'd': j[field] = to_double(it->second, field); break;
      case 'i': {
        const long long x = to_integer(it->second, field);
        if (field == "seed" || field == "max_v_configs") {
          if (x < 0) throw ConfigError("must be >= 0", field);
          j[field] = static_cast<std::uint64_t>(x);
        } else {
          j[field] = x;
        }
        break;
      }
      case 'p':
        try {
          j[field] = to_json(parse_prior_spec(it->second));
        } catch (const ConfigError& e) {
          throw ConfigError(e.what(), field);
        }
        break;
      default: j[field] = it->second;
    }
  }
  for (const auto& row : kMcmcFlags) {
    if (auto it = v.find(row[0]); it != v.end()) {
      j["mcmc"][row[1]] = to_integer(it->second, std::string("mcmc.") + row[1]);
    }
  }
  if (auto it = v.find("s-grid"); it != v.end()) j["s_grid"] = number_list(it->second, "s_grid");
  if (auto it = v.find("alpha-grid"); it != v.end()) {
    j["alpha_grid"] = number_list(it->second, "alpha_grid");
  }
  if (auto it = v.find("sizes"); it != v.end()) j["sizes"] = size_list(it->second);
  const bool has_n = v.count("n"), has_m = v.count("m");
  if (has_n || has_m) {
    if (v.count("sizes")) throw ConfigError("--n/--m cannot be combined with --sizes", "sizes");
    if (!has_n) throw ConfigError("--m needs --n", "sizes");
    json s = {{"n", to_integer(v.at("n"), "sizes")}};
    if (has_m) s["m"] = to_integer(v.at("m"), "sizes");
    j["sizes"] = json::array({s});
  }
  return j;
}

std::string help_footer() {
  std::string s = "\nConfig fields (JSON via --config, overridden by flags) and defaults:\n";
  for (const auto& [k, v] : config_field_defaults()) s += "  " + k + " = " + v + "\n";
  s += "Sizes on the command line: --sizes 8,16 or --sizes 16x32, or --n N [--m M].\n";
  return s;
}

void add_config_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file");
  auto add = [&](const std::string& name, const std::string& desc) {
    sub->add_option("--" + name, f.values[name], desc);
  };
  for (const auto& row : kScalarFlags) add(row[0], std::string("config field ") + row[1]);
  for (const auto& row : kMcmcFlags) add(row[0], std::string("config field mcmc.") + row[1]);
  add("sizes", "config field sizes");
  add("n", "single size: rows");
  add("m", "single size: columns");
  add("s-grid", "config field s_grid (comma separated)");
  add("alpha-grid", "config field alpha_grid (comma separated)");
  sub->footer(help_footer());
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'", "out");
  out << text;
  if (!out) throw ConfigError("cannot write '" + path.string() + "'", "out");
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

Prior prior_of(const PriorSpec& spec, const char* field) {
  try {
    return make_prior(spec);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), field);
  }
}

int run(const std::string& cmd, const ExperimentConfig& cfg, const Flags& flags) {
  const fs::path out = cfg.out;
  if (cmd == "simulate") {
    const Prior pu = prior_of(cfg.prior_u, "prior_u"), pv = prior_of(cfg.prior_v, "prior_v");
    const int n = cfg.sizes.front().n, m = cfg.resolve_m(cfg.sizes.front());
    const Instance inst = generate({n, m, cfg.beta}, parse_hypothesis(cfg.hypothesis), pu, pv, cfg.seed);
    fs::create_directories(out);
    write_instance(inst, out / "instance",
                   cfg.format == "binary" ? MatrixFormat::Binary : MatrixFormat::Csv);
    std::cout << "wrote " << (out / "instance.json").string() << " N=" << n << " M=" << m
              << " hypothesis=" << cfg.hypothesis << " seed=" << cfg.seed << "\n";
  } else if (cmd == "loglr") {
    const Prior pu = prior_of(cfg.prior_u, "prior_u"), pv = prior_of(cfg.prior_v, "prior_v");
    Instance inst;
    double beta = cfg.beta;
    if (!cfg.input.empty()) {
      inst = read_instance(cfg.input);
      if (!flags.values.count("beta")) beta = inst.beta;
    } else {
      const int n = cfg.sizes.front().n, m = cfg.resolve_m(cfg.sizes.front());
      inst = generate({n, m, cfg.beta}, parse_hypothesis(cfg.hypothesis), pu, pv, cfg.seed);
    }
    ExactOptions opts;
    opts.max_v_configs = cfg.max_v_configs;
    opts.threads = cfg.threads;
    const LogLr r = exact_log_lr(inst, beta, pu, pv, opts);
    write_json(out / "loglr.json", {{"schema_version", kReportSchemaVersion},
                                    {"instance", instance_header(inst)},
                                    {"beta", beta},
                                    {"log_lr", r.value},
                                    {"v_configs", r.n_v_configs},
                                    {"config", cfg.to_json()}});
    std::printf("log_lr = %.12g (N=%d M=%d beta=%g, %llu v-configurations)\n", r.value,
                static_cast<int>(inst.data.rows()), static_cast<int>(inst.data.cols()), beta,
                static_cast<unsigned long long>(r.n_v_configs));
  } else if (cmd == "fluctuations") {
    const FluctuationReport rep = fluctuation_experiment(cfg);
    write_json(out / "fluct_report.json", rep.to_json());
    write_file(out / "samples.csv", rep.samples_csv());
    const auto& last = rep.sizes.back();
    std::cout << "N=" << last.n << " null mean " << g(last.null_samples.summary.mean) << " alt mean "
              << g(last.alt_samples.summary.mean) << " var " << g(last.null_samples.summary.variance)
              << " | predicted mean +-" << g(rep.predicted.mean_alt) << " var "
              << g(rep.predicted.variance) << " [" << rep.regime << "]\n";
  } else if (cmd == "test-error") {
    const FluctuationReport rep = fluctuation_experiment(cfg);
    json rows = json::array();
    for (const auto& r : rep.sizes) {
      json row = r.test_error.to_json();
      row["n"] = r.n;
      row["m"] = r.m;
      rows.push_back(row);
    }
    write_json(out / "test_error.json", {{"schema_version", kReportSchemaVersion},
                                         {"experiment", "test_error"},
                                         {"config", cfg.to_json()},
                                         {"regime", rep.regime},
                                         {"sizes", rows}});
    const auto& e = rep.sizes.back().test_error;
    std::cout << "N=" << rep.sizes.back().n << " test error " << g(e.empirical_err) << " +- "
              << g(e.se_err) << " (type I " << g(e.type1) << ", type II " << g(e.type2)
              << ") | predicted " << g(e.predicted_err) << "\n";
  } else if (cmd == "kl") {
    const KlReport rep = kl_experiment(cfg);
    json j = rep.to_json();
    j["config"] = cfg.to_json();
    write_json(out / "kl_report.json", j);
    const auto& p = rep.points.back();
    std::cout << "N=" << p.n << " E log L under the alternative " << g(p.empirical_mean) << " +- "
              << g(p.se) << " | predicted " << g(rep.predicted) << "\n";
  } else if (cmd == "nishimori") {
    const NishimoriReport rep = nishimori_check(cfg);
    json j = rep.to_json();
    j["config"] = cfg.to_json();
    write_json(out / "nishimori_report.json", j);
    std::cout << "N=" << rep.n << " M=" << rep.m << " draws=" << rep.draws;
    for (const auto& c : rep.comparisons) {
      std::cout << " | " << c.observable << " replica " << g(c.replica_mean) << " star "
                << g(c.star_mean) << " z=" << g(c.z());
    }
    std::cout << "\n";
  } else if (cmd == "derivative-check") {
    const DerivativeReport rep = derivative_identity_check(cfg);
    json j = rep.to_json();
    j["config"] = cfg.to_json();
    write_json(out / "derivative_report.json", j);
    std::cout << "finite difference " << g(rep.fd_derivative) << " | overlap side "
              << g(rep.overlap_rhs) << " | gap " << g(rep.gap) << " +- " << g(rep.gap_se) << "\n";
  } else if (cmd == "overlaps") {
    const McmcValidation val = validate_mcmc(cfg, 4, 4, 200000);
    const OverlapReport rep = overlap_scaling(cfg);
    json j = rep.to_json();
    j["config"] = cfg.to_json();
    j["mcmc_validation"] = val.to_json();
    j["mcmc_validation"]["passed"] = val.passed();
    write_json(out / "overlaps_report.json", j);
    const auto& p = rep.points.back();
    std::cout << "N=" << p.n << " N<RuRv> " << g(p.n_ru_rv) << " +- " << g(p.n_ru_rv_se)
              << " | predicted " << g(rep.theta) << " | N^2<Ru^4> " << g(p.n2_ru4)
              << " | sampler check " << (val.passed() ? "ok" : "FAILED") << "\n";
  } else if (cmd == "rs-solve") {
    const Prior pu = prior_of(cfg.prior_u, "prior_u"), pv = prior_of(cfg.prior_v, "prior_v");
    RsOptions opts;
    opts.quad_nodes = cfg.quad_nodes;
    const RsSolution s = solve_rs(cfg.alpha, cfg.beta, pu, pv, opts);
    json j = s.to_json();
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = cfg.to_json();
    write_json(out / "rs_solution.json", j);
    std::printf("phi_rs = %.9g at q_u = %.6g, q_v = %.6g (alpha beta^2 = %g)\n", s.phi_rs, s.q_u,
                s.q_v, cfg.alpha * cfg.beta * cfg.beta);
  } else if (cmd == "phase-boundary") {
    const Prior pu = prior_of(cfg.prior_u, "prior_u"), pv = prior_of(cfg.prior_v, "prior_v");
    RsOptions opts;
    opts.quad_nodes = cfg.quad_nodes;
    const PhaseBoundary pb = phase_boundary(cfg.alpha_grid, pu, pv, cfg.tol, opts, cfg.threads);
    json j = pb.to_json();
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = cfg.to_json();
    write_json(out / "phase_boundary.json", j);
    write_file(out / "phase_boundary.csv", pb.to_csv());
    double worst = 0.0;
    for (std::size_t k = 0; k < pb.alpha_grid.size(); ++k) {
      if (!pb.unbounded[k]) worst = std::max(worst, pb.alpha_grid[k] * pb.beta_star[k] * pb.beta_star[k]);
    }
    std::cout << pb.alpha_grid.size() << " boundary points, max alpha beta*^2 = " << g(worst)
              << " (spectral threshold 1)\n";
  } else if (cmd == "spectral-power") {
    const SpectralPowerReport rep = spectral_power_experiment(cfg);
    json j = rep.to_json();
    j["config"] = cfg.to_json();
    write_json(out / "spectral_power.json", j);
    std::cout << "N=" << rep.n << " power " << g(rep.power_above) << " at beta=" << g(cfg.beta_above)
              << ", " << g(rep.power_below) << " at beta=" << g(cfg.beta_below) << ", false alarm "
              << g(rep.false_alarm) << " | bulk edge " << g(rep.bulk_edge) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the spiked rectangular model"};
  app.require_subcommand(1, 1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "draw one instance and write it to <out>/instance.json"},
      {"loglr", "exact log-likelihood ratio of one instance"},
      {"fluctuations", "log-LR samples under both hypotheses"},
      {"test-error", "error of the likelihood-ratio test"},
      {"kl", "mean log-LR under the alternative"},
      {"nishimori", "replica-replica versus replica-spike overlap moments"},
      {"derivative-check", "beta-derivative of the mean log-LR versus overlaps"},
      {"overlaps", "overlap moments by Gibbs sampling"},
      {"rs-solve", "replica-symmetric variational problem"},
      {"phase-boundary", "phase boundary of the replica-symmetric formula"},
      {"spectral-power", "top-eigenvalue test power"}};
  std::map<std::string, Flags> flags;
  for (const auto& [name, desc] : commands) add_config_flags(app.add_subcommand(name, desc), flags[name]);
  app.footer(help_footer());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  Flags& f = flags[cmd];
  // Flags that were not given keep an empty string; drop them.
  for (auto it = f.values.begin(); it != f.values.end();) {
    it = app.get_subcommands().front()->count("--" + it->first) ? std::next(it) : f.values.erase(it);
  }

  try {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = load_config(f.config_path, cfg);
    cfg = merge_config(cfg, flags_to_json(f));
    cfg.validate();
    return run(cmd, cfg, f);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
