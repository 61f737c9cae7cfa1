// Digamma closed forms, the exact log-domain chain accumulator against a
// quad-precision oracle, spectrum estimation, and collapse-depth prediction.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rankscope/lyapunov.hpp"
#include "rankscope/spectral.hpp"
#include "rankscope/svd.hpp"

#include "oracle_quad.hpp"

using namespace rankscope;

namespace {

constexpr double kEulerGamma = 0.5772156649015329;
constexpr double kLn2 = 0.6931471805599453;

Matrix rotation2(double theta) {
  Matrix r(2, 2);
  r(0, 0) = std::cos(theta);
  r(0, 1) = -std::sin(theta);
  r(1, 0) = std::sin(theta);
  r(1, 1) = std::cos(theta);
  return r;
}

Matrix gaussian_square(int n, std::uint64_t seed) {
  GaussianStream g(seed);
  return gaussian_matrix(n, n, g);
}

}  // namespace

TEST_CASE("digamma matches closed forms and the recurrence") {
  REQUIRE(digamma(1.0) == Catch::Approx(-kEulerGamma).margin(1e-14));
  REQUIRE(digamma(0.5) == Catch::Approx(-kEulerGamma - 2.0 * kLn2).margin(1e-14));
  REQUIRE(digamma(2.0) == Catch::Approx(1.0 - kEulerGamma).margin(1e-14));
  for (double x : {0.1, 0.37, 0.9, 1.6, 2.5, 5.9, 9.4, 12.0, 40.0})
    REQUIRE(digamma(x + 1.0) == Catch::Approx(digamma(x) + 1.0 / x).margin(1e-12));
  REQUIRE_THROWS_AS(digamma(0.0), input_error);
  REQUIRE_THROWS_AS(digamma(-3.5), input_error);
}

TEST_CASE("theory spectrum closed forms at n = 2") {
  const std::vector<double> lambda = theory_spectrum(2);
  REQUIRE(lambda[0] == Catch::Approx(0.0579657578292062).margin(1e-15));
  REQUIRE(lambda[0] - lambda[1] == Catch::Approx(kLn2).margin(1e-14));
  // Strictly decreasing for larger n.
  const std::vector<double> l6 = theory_spectrum(6);
  for (std::size_t k = 1; k < l6.size(); ++k) REQUIRE(l6[k] < l6[k - 1]);
  REQUIRE_THROWS_AS(theory_spectrum(0), input_error);
}

TEST_CASE("theory ratio rate closed forms") {
  REQUIRE(theory_ratio_rate(2, 2) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(theory_ratio_rate(4, 2) == Catch::Approx(0.8243606353500641).margin(1e-14));
  for (int n : {2, 3, 5, 9})
    for (int k = 2; k <= n; ++k) {
      const double r = theory_ratio_rate(n, k);
      REQUIRE(r > 0.0);
      REQUIRE(r < 1.0);
    }
  REQUIRE_THROWS_AS(theory_ratio_rate(1, 2), input_error);
  REQUIRE_THROWS_AS(theory_ratio_rate(4, 1), input_error);
  REQUIRE_THROWS_AS(theory_ratio_rate(4, 5), input_error);
}

TEST_CASE("chain accumulator is exact on identity, diagonal and orthogonal factors") {
  ChainConfig cfg;
  cfg.trials = 1;

  cfg.n = 4;
  cfg.depth = 7;
  auto rows = simulate_chain_with(cfg, [](int, int) { return identity(4); });
  for (double v : rows[0]) REQUIRE(std::abs(v) < 1e-14);

  cfg.n = 2;
  cfg.depth = 40;
  rows = simulate_chain_with(cfg, [](int, int) { return diagonal({2.0, 1.0}); });
  REQUIRE(rows[0][0] == Catch::Approx(40.0 * kLn2).margin(1e-12));
  REQUIRE(std::abs(rows[0][1]) < 1e-12);

  cfg.depth = 50;
  rows = simulate_chain_with(cfg, [](int, int step) { return rotation2(0.3 + 0.01 * step); });
  for (double v : rows[0]) REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("chain accumulator with one factor reproduces the svd") {
  const Matrix g = gaussian_square(5, 77);
  ChainConfig cfg;
  cfg.n = 5;
  cfg.depth = 1;
  cfg.trials = 1;
  const auto rows = simulate_chain_with(cfg, [&](int, int) { return g; });
  const std::vector<double> sv = singular_values(g);
  for (int k = 0; k < 5; ++k)
    REQUIRE(rows[0][static_cast<std::size_t>(k)] ==
            Catch::Approx(std::log(sv[static_cast<std::size_t>(k)])).margin(1e-12));
}

TEST_CASE("simulated gaussian chains match the quad-precision product oracle") {
  ChainConfig cfg;
  cfg.n = 3;
  cfg.depth = 10;
  cfg.trials = 2;
  cfg.seed = 123;
  const auto rows = simulate_chain(cfg);
  for (int trial = 0; trial < cfg.trials; ++trial) {
    // Replicate the factor stream the simulator drew.
    GaussianStream g(substream(cfg.seed, static_cast<std::uint64_t>(trial)));
    std::vector<Matrix> factors;
    for (int step = 0; step < cfg.depth; ++step) {
      Matrix f(cfg.n, cfg.n);
      for (double& v : f.data()) v = g.next();
      factors.push_back(f);
    }
    const std::vector<double> exact = oracle::product_log_singular_values(factors);
    for (int k = 0; k < cfg.n; ++k)
      REQUIRE(rows[static_cast<std::size_t>(trial)][static_cast<std::size_t>(k)] ==
              Catch::Approx(exact[static_cast<std::size_t>(k)]).margin(1e-10));
  }
}

TEST_CASE("accumulator handles scale gaps far beyond double precision per trial") {
  // Factors F_i = Q_{i+1} D Q_i^T telescope, so the product is
  // Q_{16} D^{15} Q_1^T and the exact log singular values are +-30. Each
  // step is mildly conditioned (e^4), yet the accumulated gap of 60 log
  // units forces the split-scale branch of the extraction; a Gram matrix of
  // the direct product would need e^{120} of dynamic range.
  std::vector<Matrix> qs;
  for (int i = 0; i <= 15; ++i) qs.push_back(rotation2(0.17 + 0.41 * i));
  std::vector<Matrix> factors;
  for (int step = 0; step < 15; ++step)
    factors.push_back(multiply(qs[static_cast<std::size_t>(step + 1)],
                               multiply(diagonal({std::exp(2.0), std::exp(-2.0)}),
                                        transpose(qs[static_cast<std::size_t>(step)]))));
  ChainConfig cfg;
  cfg.n = 2;
  cfg.depth = 15;
  cfg.trials = 1;
  const auto rows = simulate_chain_with(
      cfg, [&](int, int step) { return factors[static_cast<std::size_t>(step)]; });
  REQUIRE(rows[0][0] == Catch::Approx(30.0).margin(1e-11));
  REQUIRE(rows[0][1] == Catch::Approx(-30.0).margin(1e-11));
}

TEST_CASE("estimate_spectrum converges to the digamma law") {
  ChainConfig cfg;
  cfg.n = 2;
  cfg.depth = 500;
  cfg.trials = 20;
  cfg.seed = 7;
  const LyapunovEstimate est = estimate_spectrum(cfg);
  REQUIRE(est.n == 2);
  REQUIRE(est.lambda_hat.size() == 2);
  REQUIRE(est.stderr_k.size() == 2);
  REQUIRE(est.theory.size() == 2);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(est.stderr_k[static_cast<std::size_t>(k)] > 0.0);
    const double z = (est.lambda_hat[static_cast<std::size_t>(k)] -
                      est.theory[static_cast<std::size_t>(k)]) /
                     est.stderr_k[static_cast<std::size_t>(k)];
    REQUIRE(std::abs(z) < 4.0);
  }
  REQUIRE(std::abs(est.lambda_hat[0] - 0.058) < 0.05);
}

TEST_CASE("collapse depth prediction") {
  // float32 tolerance with two resolved directions: eps = 2 * 1.19e-7.
  REQUIRE(collapse_depth(2, ToleranceSpec::float32(2).epsilon()) == 22);
  REQUIRE(collapse_depth_at_rate(1, 0.5, 0.5) == 2);
  REQUIRE_THROWS_AS(collapse_depth_at_rate(2, 0.0, 0.5), input_error);
  REQUIRE_THROWS_AS(collapse_depth_at_rate(2, 1.0, 0.5), input_error);
  REQUIRE_THROWS_AS(collapse_depth_at_rate(2, 0.5, 1.0), input_error);
  REQUIRE_THROWS_AS(collapse_depth_at_rate(2, 0.5, 0.0), input_error);
  REQUIRE_THROWS_AS(collapse_depth_at_rate(0, 0.5, 0.5), input_error);
}

TEST_CASE("rank one fraction saturates well past the predicted collapse depth") {
  ChainConfig cfg;
  cfg.n = 2;
  cfg.trials = 50;
  cfg.seed = 11;
  const double eps = ToleranceSpec::float32(2).epsilon();
  cfg.depth = 120;
  REQUIRE(rank_one_fraction(cfg, eps) == 1.0);
  cfg.depth = 1;
  REQUIRE(rank_one_fraction(cfg, eps) == 0.0);
  REQUIRE_THROWS_AS(rank_one_fraction(cfg, 0.0), input_error);
}

TEST_CASE("chain config validation") {
  ChainConfig cfg;
  cfg.n = 0;
  REQUIRE_THROWS_AS(validate_chain_config(cfg), input_error);
  cfg.n = 2;
  cfg.depth = 0;
  REQUIRE_THROWS_AS(validate_chain_config(cfg), input_error);
  cfg.depth = 1;
  cfg.trials = 0;
  REQUIRE_THROWS_AS(validate_chain_config(cfg), input_error);
}
