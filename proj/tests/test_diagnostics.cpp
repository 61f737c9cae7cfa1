// Partial-rank sweeps, classification dimension, perturbed PCA dimension,
// structural probes, the linear-chain experiment, and rank-deficiency
// probability estimates.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rankscope/diagnostics.hpp"

using namespace rankscope;

namespace {

Matrix gaussian_mat(int rows, int cols, std::uint64_t seed) {
  GaussianStream g(seed);
  return gaussian_matrix(rows, cols, g);
}

Matrix rank_r_matrix(int rows, int cols, int r, std::uint64_t seed) {
  return multiply(gaussian_mat(rows, r, seed), gaussian_mat(r, cols, seed + 1));
}

JacobianProbe full_probe(int dim) {
  JacobianProbe p;
  for (int j = 0; j < dim; ++j) p.column_indices.push_back(j);
  return p;
}

}  // namespace

TEST_CASE("partial rank sweep collapses through a rank-one bottleneck") {
  NetworkSpec net;
  net.input_dim = 6;
  net.layers = {dense_explicit(gaussian_mat(6, 6, 2)),
                dense_explicit(rank_r_matrix(6, 6, 1, 40)), activation(ActKind::GELU)};
  const ToleranceSpec tol = ToleranceSpec::relative(1e-9);
  GaussianStream g(15);
  std::vector<double> x(6);
  for (double& v : x) v = g.next();
  const RankSweepResult res = partial_rank_sweep(net, x, full_probe(6), tol);
  REQUIRE(res.rows.size() == 3);
  REQUIRE(res.rows[0].depth == 1);
  REQUIRE(res.rows[0].partial_rank == 6);
  REQUIRE(res.rows[1].partial_rank <= 1);
  REQUIRE(res.rows[2].partial_rank <= 1);
  for (const RankSweepRow& row : res.rows) {
    REQUIRE(row.probe_size == 6);
    REQUIRE(row.epsilon == tol.epsilon());
  }
}

TEST_CASE("partial rank sweep through an identity chain keeps the probe rank") {
  NetworkSpec net;
  net.input_dim = 5;
  for (int l = 0; l < 4; ++l) net.layers.push_back(dense_explicit(identity(5)));
  JacobianProbe probe;
  probe.column_indices = {0, 2, 4};
  const std::vector<double> x(5, 0.25);
  const RankSweepResult res =
      partial_rank_sweep(net, x, probe, ToleranceSpec::float32(5));
  REQUIRE(res.rows.size() == 4);
  for (const RankSweepRow& row : res.rows) {
    REQUIRE(row.partial_rank == 3);
    REQUIRE(row.probe_size == 3);
  }
}

TEST_CASE("cls_dim finds one component for one-dimensional separable features") {
  const int n = 20;
  Matrix features(n, 4);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    labels[static_cast<std::size_t>(i)] = label;
    features(i, 0) = (label ? 1.0 : -1.0) * (1.0 + 0.01 * i);
  }
  ClsDimConfig cfg;
  cfg.retention = 1.0;
  cfg.head = Matrix(2, 4);
  cfg.head(0, 0) = -1.0;
  cfg.head(1, 0) = 1.0;
  const ClsDimResult res = cls_dim(features, labels, cfg);
  REQUIRE(res.attained);
  REQUIRE(res.dim == 1);
  REQUIRE(res.baseline_accuracy == 1.0);
  REQUIRE(res.achieved_accuracy == 1.0);
}

TEST_CASE("cls_dim is bounded by the true feature subspace dimension") {
  const int n = 40, d = 8, r = 3, classes = 4;
  const Matrix features = multiply(gaussian_mat(n, r, 31), gaussian_mat(r, d, 32));
  ClsDimConfig cfg;
  cfg.retention = 1.0;
  cfg.head = gaussian_mat(classes, d, 33);
  // Labels are the full-rank predictions, so baseline accuracy is 1.
  const Matrix logits = multiply(features, transpose(cfg.head));
  std::vector<int> labels(n);
  for (int t = 0; t < n; ++t) {
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (logits(t, c) > logits(t, best)) best = c;
    labels[static_cast<std::size_t>(t)] = best;
  }
  const ClsDimResult res = cls_dim(features, labels, cfg);
  REQUIRE(res.baseline_accuracy == 1.0);
  REQUIRE(res.attained);
  REQUIRE(res.dim <= r);

  // The required dimension is monotone in the retention target.
  int prev = 0;
  for (double retention : {0.25, 0.5, 0.75, 1.0}) {
    ClsDimConfig c2 = cfg;
    c2.retention = retention;
    const int dim = cls_dim(features, labels, c2).dim;
    REQUIRE(dim >= prev);
    prev = dim;
  }
}

TEST_CASE("cls_dim reports failure when an absolute target is unreachable") {
  Matrix features(2, 2);
  features(0, 0) = features(1, 0) = 1.0;
  ClsDimConfig cfg;
  cfg.mode = ClsDimConfig::Mode::Absolute;
  cfg.retention = 1.0;
  cfg.head = identity(2);
  const ClsDimResult res = cls_dim(features, {0, 1}, cfg);
  REQUIRE_FALSE(res.attained);
  REQUIRE(res.dim == 2);
  REQUIRE(res.achieved_accuracy == 0.5);
}

TEST_CASE("argmax accuracy resolves ties to the lowest class index") {
  Matrix logits(1, 2);
  logits(0, 0) = logits(0, 1) = 0.7;
  REQUIRE(detail::argmax_accuracy(logits, {0}) == 1.0);
  REQUIRE(detail::argmax_accuracy(logits, {1}) == 0.0);
}

TEST_CASE("cls_dim validates its inputs") {
  Matrix features(3, 2);
  features(0, 0) = 1.0;
  ClsDimConfig cfg;
  cfg.head = identity(2);
  REQUIRE_THROWS_AS(cls_dim(features, {0, 1}, cfg), input_error);        // label count
  REQUIRE_THROWS_AS(cls_dim(features, {0, 1, 2}, cfg), input_error);     // label range
  cfg.head = identity(3);
  REQUIRE_THROWS_AS(cls_dim(features, {0, 1, 0}, cfg), input_error);     // head width
  cfg.head = identity(2);
  cfg.retention = 0.0;
  REQUIRE_THROWS_AS(cls_dim(features, {0, 1, 0}, cfg), input_error);
  cfg.retention = 1.5;
  REQUIRE_THROWS_AS(cls_dim(features, {0, 1, 0}, cfg), input_error);
}

TEST_CASE("perturbed pca dimension recovers exact image dimensions") {
  PertDimConfig cfg;
  cfg.samples = 300;
  cfg.noise_std = 1e-3;
  const auto points = gaussian_points(3, 6, 5);

  NetworkSpec ident;
  ident.input_dim = 6;
  ident.layers = {dense_explicit(identity(6))};
  REQUIRE(perturbed_pca_dim(ident, 1, points, cfg, 17) == 6.0);
  REQUIRE(perturbed_pca_dim(ident, 0, points, cfg, 17) == 6.0);

  NetworkSpec proj;
  proj.input_dim = 6;
  proj.layers = {dense_explicit(diagonal({1, 1, 0, 0, 0, 0}))};
  REQUIRE(perturbed_pca_dim(proj, 1, points, cfg, 17) == 2.0);

  NetworkSpec low;
  low.input_dim = 6;
  low.layers = {dense_explicit(rank_r_matrix(6, 6, 4, 91))};
  REQUIRE(perturbed_pca_dim(low, 1, points, cfg, 17) == 4.0);
}

TEST_CASE("perturbed pca dimension sees the layer-norm manifold as n - 2 dimensional") {
  // Small neighborhoods land on the codimension-2 sphere-slice the
  // normalization maps onto; the noise scale keeps curvature terms below
  // the eigenvalue threshold.
  NetworkSpec net;
  net.input_dim = 8;
  net.layers = {layer_norm()};
  PertDimConfig cfg;
  cfg.samples = 300;
  cfg.noise_std = 1e-6;
  const auto points = gaussian_points(2, 8, 77);
  REQUIRE(perturbed_pca_dim(net, 1, points, cfg, 6) == 6.0);
}

TEST_CASE("perturbed pca dimension validates its inputs") {
  NetworkSpec net;
  net.input_dim = 4;
  net.layers = {dense_explicit(identity(4))};
  const auto points = gaussian_points(2, 4, 3);
  PertDimConfig cfg;
  cfg.noise_std = 0.0;
  REQUIRE_THROWS_AS(perturbed_pca_dim(net, 1, points, cfg, 1), input_error);
  cfg.noise_std = 1e-3;
  cfg.samples = 1;
  REQUIRE_THROWS_AS(perturbed_pca_dim(net, 1, points, cfg, 1), input_error);
  cfg.samples = 100;
  REQUIRE_THROWS_AS(perturbed_pca_dim(net, 2, points, cfg, 1), input_error);
  REQUIRE_THROWS_AS(perturbed_pca_dim(net, 1, {}, cfg, 1), input_error);
  REQUIRE_THROWS_AS(perturbed_pca_dim(net, 1, {{1.0, 2.0}}, cfg, 1), input_error);
}

TEST_CASE("structural probe reports both data dimensions and the jacobian rank") {
  const ToleranceSpec tol = ToleranceSpec::float32(64);

  const StructuralProbeResult dense =
      structural_probe(dense_explicit(rank_r_matrix(8, 8, 5, 55)), 8, 64, 1, tol);
  REQUIRE(dense.dim_before == 8);
  REQUIRE(dense.dim_after == 5);
  REQUIRE(dense.jacobian_rank == 5);

  const StructuralProbeResult relu = structural_probe(activation(ActKind::ReLU), 8, 64, 21, tol);
  REQUIRE(relu.dim_before == 8);
  REQUIRE(relu.dim_after == 8);
  // The jacobian rank equals the number of positive coordinates of the
  // first probe sample, reproduced here from the probe's input stream.
  GaussianStream g(substream(21, 0x696e));
  int positives = 0;
  for (int j = 0; j < 8; ++j)
    if (g.next() > 0.0) ++positives;
  REQUIRE(relu.jacobian_rank == positives);
}

TEST_CASE("structural probe of layer norm drops exactly two jacobian directions") {
  const StructuralProbeResult res =
      structural_probe(layer_norm(), 64, 120, 9, ToleranceSpec::float32(120));
  REQUIRE(res.dim_before == 64);
  // Outputs sum to zero exactly, so the data cloud spans the zero-sum
  // hyperplane; the pointwise jacobian also loses the radial direction.
  REQUIRE(res.dim_after == 63);
  REQUIRE(res.jacobian_rank == 62);
}

TEST_CASE("structural probe validates width and batch") {
  const ToleranceSpec tol = ToleranceSpec::float32(4);
  REQUIRE_THROWS_AS(structural_probe(layer_norm(), 0, 8, 1, tol), input_error);
  REQUIRE_THROWS_AS(structural_probe(layer_norm(), 4, 1, 1, tol), input_error);
}

TEST_CASE("linear chain experiment produces per-depth rank rows") {
  const ToleranceSpec tol = ToleranceSpec::float32(10);
  const auto rows = linear_chain_experiment(10, 8, 3, tol);
  REQUIRE(rows.size() == 8);
  for (int k = 0; k < 8; ++k) {
    REQUIRE(rows[static_cast<std::size_t>(k)].depth == k + 1);
    REQUIRE(rows[static_cast<std::size_t>(k)].jac_rank >= 1);
    REQUIRE(rows[static_cast<std::size_t>(k)].jac_rank <= 10);
    REQUIRE(rows[static_cast<std::size_t>(k)].cov_rank >= 1);
    REQUIRE(rows[static_cast<std::size_t>(k)].cov_rank <= 10);
  }
  for (std::size_t k = 1; k < rows.size(); ++k) {
    REQUIRE(rows[k].jac_rank <= rows[k - 1].jac_rank);
    REQUIRE(rows[k].cov_rank <= rows[k - 1].cov_rank);
  }
  REQUIRE_THROWS_AS(linear_chain_experiment(0, 4, 1, tol), input_error);
  REQUIRE_THROWS_AS(linear_chain_experiment(2000, 4, 1, tol), input_error);
  REQUIRE_THROWS_AS(linear_chain_experiment(10, 0, 1, tol), input_error);
  REQUIRE_THROWS_AS(linear_chain_experiment(10, 100, 1, tol), input_error);
}

TEST_CASE("rank deficiency probability hits both trivial extremes") {
  const auto rows = rank_deficiency_probabilities(6, 4, {0.0, 1.0}, 40, 12);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].epsilon == 0.0);
  REQUIRE(rows[0].estimate == 0.0);
  REQUIRE(rows[0].stderr_est == 0.0);
  REQUIRE(rows[1].estimate == 1.0);
  REQUIRE(rows[1].trials == 40);
}

TEST_CASE("rank deficiency probability is monotone in epsilon") {
  const auto rows =
      rank_deficiency_probabilities(30, 30, {1e-6, 1e-4, 1e-2, 1e-1}, 400, 8);
  for (std::size_t e = 1; e < rows.size(); ++e)
    REQUIRE(rows[e].estimate >= rows[e - 1].estimate);
  for (const ProbabilityEstimate& r : rows) {
    REQUIRE(r.stderr_est ==
            Catch::Approx(std::sqrt(r.estimate * (1.0 - r.estimate) / 400)).margin(1e-15));
  }
  REQUIRE(rows.back().estimate > 0.5);  // eps = 0.1 kills most 30x30 samples
}

TEST_CASE("square gaussian matrices are numerically full rank at float32 tolerance") {
  // At n = 150 the smallest singular value sits far above the float32
  // threshold for all but a fraction of a percent of draws.
  const double eps = ToleranceSpec::float32(150).epsilon();
  const ProbabilityEstimate est = rank_deficiency_probability(150, 150, eps, 60, 4);
  REQUIRE(est.estimate <= 5.0 / 60.0);
}

TEST_CASE("rank deficiency estimator validates inputs") {
  REQUIRE_THROWS_AS(rank_deficiency_probabilities(0, 4, {0.1}, 10, 1), input_error);
  REQUIRE_THROWS_AS(rank_deficiency_probabilities(4, 4, {}, 10, 1), input_error);
  REQUIRE_THROWS_AS(rank_deficiency_probabilities(4, 4, {0.1}, 0, 1), input_error);
  REQUIRE_THROWS_AS(rank_deficiency_probabilities(4, 4, {-0.1}, 10, 1), input_error);
}

TEST_CASE("diagnostics are deterministic for a fixed seed") {
  const ToleranceSpec tol = ToleranceSpec::float32(10);
  const auto a = linear_chain_experiment(10, 6, 3, tol);
  const auto b = linear_chain_experiment(10, 6, 3, tol);
  for (std::size_t k = 0; k < a.size(); ++k) {
    REQUIRE(a[k].jac_rank == b[k].jac_rank);
    REQUIRE(a[k].cov_rank == b[k].cov_rank);
  }
  const auto p1 = rank_deficiency_probability(20, 20, 1e-4, 50, 5);
  const auto p2 = rank_deficiency_probability(20, 20, 1e-4, 50, 5);
  REQUIRE(p1.estimate == p2.estimate);
}
