#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "spiked/model.hpp"
#include "spiked/spectral.hpp"

using namespace spiked;

TEST_CASE("power iteration matches a dense eigensolver") {
  const Prior r = Prior::rademacher();
  for (auto [n, m, beta] : {std::tuple{30, 50, 0.0}, std::tuple{60, 20, 2.0}, std::tuple{40, 40, 1.5}}) {
    const Instance inst = generate({n, m, beta}, beta > 0 ? Hypothesis::Spiked : Hypothesis::Null, r,
                                   r, static_cast<std::uint64_t>(n + m));
    const Eigen::MatrixXd yyt = inst.data * inst.data.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(yyt);
    const double want = es.eigenvalues().maxCoeff();
    CHECK(top_singular_value_sq(inst.data) == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("rank one and zero matrices") {
  Matrix y = Matrix::Zero(5, 8);
  CHECK(top_singular_value_sq(y) == 0.0);
  Instance inst;
  inst.data = y;
  const SpectralStat s = spectral_detect(inst, 8.0 / 5.0, 0.1);
  CHECK(s.decision == Decision::Null);
  CHECK(s.bulk_edge == doctest::Approx(std::pow(1 + std::sqrt(1.6), 2)));

  Eigen::VectorXd u(5), v(8);
  u << 1, -2, 0, 3, 1;
  v << 1, 1, -1, 0, 2, 1, -1, 1;
  y = u * v.transpose();
  CHECK(top_singular_value_sq(y) == doctest::Approx(u.squaredNorm() * v.squaredNorm()));
}

TEST_CASE("rayleigh quotients increase") {
  const Prior r = Prior::rademacher();
  const Instance inst = generate({50, 50, 1.2}, Hypothesis::Spiked, r, r, 4);
  std::vector<double> trace;
  PowerIterationOptions o;
  o.rayleigh_trace = &trace;
  top_singular_value_sq(inst.data, o);
  REQUIRE(trace.size() >= 2);
  for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] >= trace[k - 1] * (1 - 1e-12));
}

TEST_CASE("strong spike is detected") {
  const Prior r = Prior::rademacher();
  const Instance inst = generate({200, 200, 3.0}, Hypothesis::Spiked, r, r, 9);
  const SpectralStat s = spectral_detect(inst, 1.0, 0.2);
  CHECK(s.decision == Decision::Spiked);
  CHECK(s.margin > 0.0);
  // BBP location of the outlier: (1 + beta)(1 + alpha beta) / beta = 16/3
  CHECK(s.top_sv_sq_over_n == doctest::Approx(16.0 / 3.0).epsilon(0.1));
}
