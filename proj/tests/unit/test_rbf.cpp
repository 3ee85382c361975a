#include <doctest.h>

#include <cmath>
#include <random>

#include "nlnet/rbf.hpp"
#include "oracles.hpp"

using namespace nlnet;

namespace {

RBFMixture random_mixture(const RBFGrid& grid, int channels, int coeffs, std::mt19937_64& rng) {
  RBFMixture mix(grid, channels, coeffs);
  mix.values() = oracle::random_vector(mix.values().size(), rng);
  return mix;
}

}  // namespace

TEST_CASE("grid construction and validation") {
  const RBFGrid g = RBFGrid::make(63, 100.0);
  CHECK(g.kernels == 63);
  CHECK(g.center(0) == -100.0);
  CHECK(g.center(62) == doctest::Approx(100.0).epsilon(1e-15));
  for (int j = 1; j < 63; ++j) {
    CHECK(g.center(j) > g.center(j - 1));
    CHECK(std::abs(g.center(j) - g.center(j - 1) - g.spacing()) < 1e-12);
  }
  CHECK(g.precision == doctest::Approx(std::log(2.0) / (g.spacing() * g.spacing())).epsilon(1e-15));
  CHECK(std::exp(-g.precision * g.spacing() * g.spacing()) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(RBFGrid::make(5, 1.0, 3.0).precision == 3.0);

  CHECK_THROWS_AS(RBFGrid::make(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RBFGrid::make(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(RBFGrid::make(5, 1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(RBFGrid::make(5, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("mixture dimensions and index checks") {
  const RBFGrid g = RBFGrid::make(7, 2.0);
  const RBFMixture gray(g, 1, 24);
  CHECK(gray.values().size() == 24u * 7u);
  const RBFMixture color(g, 3, 24);
  CHECK(color.values().size() == 3u * 24u * 7u);
  CHECK(color.weights(2, 23).size() == 7u);
  CHECK_THROWS_AS(rbf_eval(gray, 1, 0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rbf_eval(gray, 0, 24, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rbf_deriv(gray, -1, 0, 0.0), std::invalid_argument);
  RBFMixture bad = gray;
  bad.values()[3] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("evaluation examples") {
  const RBFGrid g = RBFGrid::make(63, 100.0);
  RBFMixture mix(g, 1, 3);
  for (double x : {-250.0, -3.0, 0.0, 17.5, 99.0}) {
    CHECK(rbf_eval(mix, 0, 1, x) == 0.0);
    CHECK(rbf_deriv(mix, 0, 1, x) == 0.0);
  }
  mix.weights(0, 1)[20] = 2.5;
  CHECK(rbf_eval(mix, 0, 1, g.center(20)) == 2.5);
  CHECK(rbf_deriv(mix, 0, 1, g.center(20)) == 0.0);
  CHECK(rbf_eval(mix, 0, 0, g.center(20)) == 0.0);
  // Inputs far outside the grid decay instead of being clamped.
  CHECK(rbf_eval(mix, 0, 1, 1e4) == 0.0);
}

TEST_CASE("evaluation matches direct summation") {
  std::mt19937_64 rng(21);
  for (double delta : {100.0, 0.4}) {
    const RBFGrid g = RBFGrid::make(63, delta);
    const RBFMixture mix = random_mixture(g, 3, 4, rng);
    std::uniform_real_distribution<double> u(-1.3 * delta, 1.3 * delta);
    for (int t = 0; t < 200; ++t) {
      const int c = t % 3;
      const int i = (t / 3) % 4;
      const double x = u(rng);
      const double expected = oracle::psi(mix, c, i, x);
      CHECK(std::abs(rbf_eval(mix, c, i, x) - expected) <= 1e-14 * std::max(1.0, std::abs(expected)) * 10);
      double v = 0.0;
      double d = 0.0;
      mix.eval_with_deriv(c, i, x, v, d);
      CHECK(v == rbf_eval(mix, c, i, x));
      CHECK(std::abs(d - rbf_deriv(mix, c, i, x)) <= 1e-13 * std::max(1.0, std::abs(d)));
    }
  }
}

TEST_CASE("derivative matches central differences") {
  std::mt19937_64 rng(22);
  const RBFGrid g = RBFGrid::make(63, 100.0);
  const RBFMixture mix = random_mixture(g, 1, 5, rng);
  std::uniform_real_distribution<double> u(-110.0, 110.0);
  const double h = 1e-5 * g.delta;
  for (int i = 0; i < 5; ++i)
    for (int t = 0; t < 100; ++t) {
      const double x = u(rng);
      const double fd = (rbf_eval(mix, 0, i, x + h) - rbf_eval(mix, 0, i, x - h)) / (2.0 * h);
      CHECK(std::abs(rbf_deriv(mix, 0, i, x) - fd) <= 1e-7);
    }

  // Narrow color-scale kernels: same step rule, error measured against the derivative scale.
  const RBFGrid c = RBFGrid::make(63, 0.4);
  const RBFMixture cmix = random_mixture(c, 3, 2, rng);
  std::uniform_real_distribution<double> uc(-0.45, 0.45);
  const double hc = 1e-5 * c.delta;
  for (int ch = 0; ch < 3; ++ch)
    for (int t = 0; t < 100; ++t) {
      const double x = uc(rng);
      const double fd = (rbf_eval(cmix, ch, 1, x + hc) - rbf_eval(cmix, ch, 1, x - hc)) / (2.0 * hc);
      CHECK(std::abs(rbf_deriv(cmix, ch, 1, x) - fd) <= 1e-7 * std::sqrt(c.precision) * 10);
    }
}

TEST_CASE("evaluation is linear in the coefficients") {
  std::mt19937_64 rng(23);
  const RBFGrid g = RBFGrid::make(63, 100.0);
  const RBFMixture a = random_mixture(g, 1, 2, rng);
  const RBFMixture b = random_mixture(g, 1, 2, rng);
  RBFMixture sum(g, 1, 2);
  for (std::size_t k = 0; k < sum.values().size(); ++k) sum.values()[k] = 2.0 * a.values()[k] - 3.0 * b.values()[k];
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int t = 0; t < 100; ++t) {
    const double x = u(rng);
    const double expected = 2.0 * rbf_eval(a, 0, 1, x) - 3.0 * rbf_eval(b, 0, 1, x);
    CHECK(std::abs(rbf_eval(sum, 0, 1, x) - expected) <= 1e-14 * 64 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("apply_psi and apply_psi_deriv are entrywise") {
  std::mt19937_64 rng(24);
  const RBFGrid g = RBFGrid::make(15, 10.0);
  const RBFMixture mix = random_mixture(g, 3, 6, rng);
  Matrix z(40, 6);
  z.values() = oracle::random_vector(z.size(), rng, 6.0);
  const Matrix p = apply_psi(mix, 2, z);
  const Matrix d = apply_psi_deriv(mix, 2, z);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(p(r, i) == rbf_eval(mix, 2, static_cast<int>(i), z(r, i)));
      CHECK(d(r, i) == rbf_deriv(mix, 2, static_cast<int>(i), z(r, i)));
    }
  CHECK(oracle::max_abs(apply_psi(RBFMixture(g, 1, 6), 0, z).values()) == 0.0);

  Matrix single(10, 1);
  single.values() = oracle::random_vector(10, rng, 5.0);
  const RBFMixture one = random_mixture(g, 1, 1, rng);
  const Matrix ps = apply_psi(one, 0, single);
  for (std::size_t r = 0; r < 10; ++r) CHECK(ps(r, 0) == rbf_eval(one, 0, 0, single(r, 0)));
  CHECK_THROWS_AS(apply_psi(mix, 0, Matrix(5, 5)), std::invalid_argument);
  CHECK_THROWS_AS(apply_psi_deriv(mix, 3, z), std::invalid_argument);
}

TEST_CASE("linear initialization fit") {
  for (double delta : {100.0, 0.4}) {
    const RBFGrid g = RBFGrid::make(63, delta);
    Eigen::MatrixXd basis(512, 63);
    Eigen::VectorXd xs(512);
    for (int s = 0; s < 512; ++s) {
      xs(s) = -delta + 2.0 * delta * s / 511.0;
      for (int j = 0; j < 63; ++j) basis(s, j) = std::exp(-g.precision * std::pow(xs(s) - g.center(j), 2));
    }
    for (double slope : {0.1, -2.0, 1.0}) {
      const std::vector<double> pi = fit_linear_init(g, slope);
      REQUIRE(pi.size() == 63u);
      // Independent least-squares optimum by pivoted QR on the design matrix.
      const Eigen::VectorXd best = basis.colPivHouseholderQr().solve(slope * xs);
      CHECK((oracle::to_eigen(pi) - best).cwiseAbs().maxCoeff() <= 1e-9 * best.cwiseAbs().maxCoeff());

      RBFMixture mix(g, 1, 1);
      std::copy(pi.begin(), pi.end(), mix.weights(0, 0).begin());
      double worst = 0.0;
      double interior = 0.0;
      for (int s = 0; s < 512; ++s) {
        const double err = std::abs(rbf_eval(mix, 0, 0, xs(s)) - slope * xs(s));
        worst = std::max(worst, err);
        if (std::abs(xs(s)) <= 0.85 * delta) interior = std::max(interior, err);
      }
      const double optimum = (basis * best - slope * xs).cwiseAbs().maxCoeff();
      CHECK(worst <= optimum * (1.0 + 1e-9));
      CHECK(worst <= 5e-2 * std::abs(slope) * delta);
      CHECK(interior <= 5e-3 * std::abs(slope) * delta);
      for (int j = 0; j < 63; ++j) CHECK(std::abs(pi[j] + pi[62 - j]) <= 1e-9);
    }
    for (double v : fit_linear_init(g, 0.0)) CHECK(v == 0.0);
  }
}
