#include "spiked/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spiked/errors.hpp"

namespace spiked {

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t to_little_endian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((x >> (8 * b)) & 0xff) << (8 * (7 - b));
    return r;
  }
  return x;
}

}  // namespace

void ModelParams::validate() const {
  if (n_rows < 1) throw ConfigError("must be >= 1", "n");
  if (n_cols < 1) throw ConfigError("must be >= 1", "m");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("must be finite and >= 0", "beta");
}

std::string to_string(Hypothesis h) { return h == Hypothesis::Null ? "null" : "spiked"; }

Hypothesis parse_hypothesis(const std::string& s) {
  if (s == "null") return Hypothesis::Null;
  if (s == "spiked" || s == "alt" || s == "alternative") return Hypothesis::Spiked;
  throw ConfigError("expected 'null' or 'spiked', got '" + s + "'", "hypothesis");
}

static Matrix draw_noise(const ModelParams& params, Rng& rng) {
  Matrix w(params.n_rows, params.n_cols);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.normal();
  }
  return w;
}

SpikeDraw draw_spike(const ModelParams& params, const Prior& prior_u, const Prior& prior_v,
                     Rng& rng) {
  params.validate();
  prior_u.require_bounded("prior_u");
  prior_v.require_bounded("prior_v");
  SpikeDraw d;
  d.noise = draw_noise(params, rng);
  d.planted.u = sample(prior_u, static_cast<std::size_t>(params.n_rows), rng);
  d.planted.v = sample(prior_v, static_cast<std::size_t>(params.n_cols), rng);
  return d;
}

Instance assemble(const SpikeDraw& draw, double beta, std::uint64_t seed) {
  Instance inst;
  const auto n = draw.noise.rows();
  const double scale = std::sqrt(beta / static_cast<double>(n));
  inst.data = draw.noise;
  for (Eigen::Index i = 0; i < inst.data.rows(); ++i) {
    const double ui = scale * draw.planted.u[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < inst.data.cols(); ++j) {
      inst.data(i, j) += ui * draw.planted.v[static_cast<std::size_t>(j)];
    }
  }
  inst.planted = draw.planted;
  inst.hypothesis = Hypothesis::Spiked;
  inst.beta = beta;
  inst.seed = seed;
  return inst;
}

Instance generate_null(const ModelParams& params, Rng& rng, std::uint64_t seed) {
  params.validate();
  Instance inst;
  inst.data = draw_noise(params, rng);
  inst.hypothesis = Hypothesis::Null;
  inst.beta = params.beta;
  inst.seed = seed;
  return inst;
}

Instance generate_spiked(const ModelParams& params, const Prior& prior_u, const Prior& prior_v,
                         Rng& rng, std::uint64_t seed) {
  return assemble(draw_spike(params, prior_u, prior_v, rng), params.beta, seed);
}

Instance generate(const ModelParams& params, Hypothesis h, const Prior& prior_u,
                  const Prior& prior_v, std::uint64_t seed) {
  Rng rng(seed);
  if (h == Hypothesis::Null) return generate_null(params, rng, seed);
  return generate_spiked(params, prior_u, prior_v, rng, seed);
}

double hamiltonian(const Instance& instance, double beta, std::span<const double> u,
                   std::span<const double> v) {
  const auto n = instance.data.rows();
  const auto m = instance.data.cols();
  if (static_cast<Eigen::Index>(u.size()) != n || static_cast<Eigen::Index>(v.size()) != m) {
    throw ConfigError("configuration length does not match the data matrix", "u/v");
  }
  const Eigen::Map<const Eigen::VectorXd> uu(u.data(), n);
  const Eigen::Map<const Eigen::VectorXd> vv(v.data(), m);
  const double nn = static_cast<double>(n);
  return std::sqrt(beta / nn) * uu.dot(instance.data * vv) -
         beta / (2.0 * nn) * uu.squaredNorm() * vv.squaredNorm();
}

nlohmann::json instance_header(const Instance& instance) {
  nlohmann::json h;
  h["n"] = instance.n_rows();
  h["m"] = instance.n_cols();
  h["beta"] = instance.beta;
  h["hypothesis"] = to_string(instance.hypothesis);
  h["seed"] = instance.seed;
  if (instance.planted) {
    h["planted"] = {{"u", instance.planted->u}, {"v", instance.planted->v}};
  }
  return h;
}

void write_instance(const Instance& instance, const std::filesystem::path& stem,
                    MatrixFormat format) {
  nlohmann::json h = instance_header(instance);
  std::filesystem::path matrix_path = stem;
  matrix_path += format == MatrixFormat::Csv ? ".csv" : ".bin";
  h["matrix_format"] = format == MatrixFormat::Csv ? "csv" : "binary_f64le";
  h["matrix_file"] = matrix_path.filename().string();

  const auto& y = instance.data;
  if (format == MatrixFormat::Csv) {
    std::ofstream out(matrix_path);
    if (!out) throw ConfigError("cannot open " + matrix_path.string(), "out");
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        if (j) out << ',';
        out << format_double(y(i, j));
      }
      out << '\n';
    }
  } else {
    std::ofstream out(matrix_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + matrix_path.string(), "out");
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(y.data()[k]));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  std::filesystem::path header_path = stem;
  header_path += ".json";
  std::ofstream hout(header_path);
  if (!hout) throw ConfigError("cannot open " + header_path.string(), "out");
  hout << h.dump(2) << '\n';
}

Instance read_instance(const std::filesystem::path& header_json) {
  std::ifstream hin(header_json);
  if (!hin) throw ConfigError("cannot open " + header_json.string(), "input");
  const nlohmann::json h = nlohmann::json::parse(hin);
  Instance inst;
  const int n = h.at("n").get<int>();
  const int m = h.at("m").get<int>();
  if (n < 1 || m < 1) throw ConfigError("bad matrix dimensions in header", "input");
  inst.beta = h.value("beta", 0.0);
  inst.hypothesis = parse_hypothesis(h.value("hypothesis", std::string("null")));
  inst.seed = h.value("seed", std::uint64_t{0});
  if (h.contains("planted")) {
    Planted p;
    p.u = h["planted"].at("u").get<std::vector<double>>();
    p.v = h["planted"].at("v").get<std::vector<double>>();
    if (static_cast<int>(p.u.size()) != n || static_cast<int>(p.v.size()) != m) {
      throw ConfigError("planted factor lengths do not match (n, m)", "input");
    }
    inst.planted = std::move(p);
  }
  if (inst.planted.has_value() != (inst.hypothesis == Hypothesis::Spiked)) {
    throw ConfigError("planted factors must be present iff hypothesis is spiked", "input");
  }

  const auto matrix_path = header_json.parent_path() / h.at("matrix_file").get<std::string>();
  const std::string fmt = h.at("matrix_format").get<std::string>();
  inst.data.resize(n, m);
  if (fmt == "csv") {
    std::ifstream in(matrix_path);
    if (!in) throw ConfigError("cannot open " + matrix_path.string(), "input");
    std::string line;
    for (int i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw ConfigError("matrix CSV has too few rows", "input");
      std::istringstream row(line);
      std::string cell;
      for (int j = 0; j < m; ++j) {
        if (!std::getline(row, cell, ',')) {
          throw ConfigError("matrix CSV row " + std::to_string(i) + " is short", "input");
        }
        inst.data(i, j) = std::strtod(cell.c_str(), nullptr);
      }
    }
  } else if (fmt == "binary_f64le") {
    std::ifstream in(matrix_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + matrix_path.string(), "input");
    for (Eigen::Index k = 0; k < inst.data.size(); ++k) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
        throw ConfigError("binary matrix file is truncated", "input");
      }
      inst.data.data()[k] = std::bit_cast<double>(to_little_endian(bits));
    }
  } else {
    throw ConfigError("unknown matrix_format '" + fmt + "'", "input");
  }
  return inst;
}

}  // namespace spiked
