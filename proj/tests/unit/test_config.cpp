#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "spiked/config.hpp"
#include "spiked/errors.hpp"

using namespace spiked;
using nlohmann::json;

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.alpha == 1.0);
  CHECK(c.beta == 0.6);
  CHECK(c.samples == 2000);
  CHECK(c.mcmc.replicas == 4);
  CHECK(c.resolve_m(c.sizes.front()) == 16);
  c.validate();
}

TEST_CASE("merging overrides only the given fields") {
  ExperimentConfig base;
  base.seed = 5;
  const ExperimentConfig c = merge_config(
      base, json::parse(R"({"alpha": 2, "sizes": [8, {"n": 4, "m": 3}], "mcmc": {"sweeps": 500},
                            "prior_u": "sparse_rademacher:0.5", "engine": "mcmc"})"));
  CHECK(c.alpha == 2.0);
  CHECK(c.seed == 5);
  REQUIRE(c.sizes.size() == 2);
  CHECK(c.resolve_m(c.sizes[0]) == 16);
  CHECK(c.resolve_m(c.sizes[1]) == 3);
  CHECK(c.mcmc.sweeps == 500);
  CHECK(c.mcmc.replicas == 4);
  CHECK(c.prior_u.family == PriorFamily::SparseRademacher);
  CHECK(c.engine == Engine::Mcmc);
}

TEST_CASE("precedence: defaults < file < overrides") {
  const std::string path = "spiked_config_test.json";
  {
    std::ofstream f(path);
    f << R"({"schema_version": 1, "beta": 0.3, "samples": 10})";
  }
  ExperimentConfig c = load_config(path);
  CHECK(c.beta == 0.3);
  CHECK(c.samples == 10);
  CHECK(c.alpha == 1.0);
  c = merge_config(c, json{{"beta", 0.4}});
  CHECK(c.beta == 0.4);
  CHECK(c.samples == 10);
  std::remove(path.c_str());
}

TEST_CASE("errors name the offending field") {
  auto field_of = [](const json& j) {
    try {
      merge_config({}, j).validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("none");
  };
  CHECK(field_of(json{{"betta", 1}}) == "betta");
  CHECK(field_of(json{{"beta", -1}}) == "beta");
  CHECK(field_of(json{{"alpha", "two"}}) == "alpha");
  CHECK(field_of(json{{"engine", "gpu"}}) == "engine");
  CHECK(field_of(json{{"mcmc", {{"burn_in", 5000}}}}) == "mcmc.burn_in");
  CHECK(field_of(json{{"mcmc", {{"steps", 5}}}}) == "mcmc.steps");
  CHECK(field_of(json{{"samples", 0}}) == "samples");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("to_json round-trips through merge") {
  ExperimentConfig c;
  c.alpha = 0.5;
  c.sizes = {{8, 0}, {12, 5}};
  c.s_grid = {1.0};
  c.prior_v.family = PriorFamily::SparseRademacher;
  c.prior_v.rho = 0.1;
  const ExperimentConfig back = merge_config({}, c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_FALSE(config_field_defaults().empty());
}
