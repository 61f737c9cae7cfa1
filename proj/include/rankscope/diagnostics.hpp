// Measurement procedures over networks and samples: per-depth partial-rank
// sweeps, classification dimension, perturbed-neighborhood PCA dimension,
// structural component probes, the linear-chain experiment, and the
// Gaussian rank-deficiency probability estimator.
#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"
#include "rankscope/net.hpp"
#include "rankscope/parallel.hpp"
#include "rankscope/rng.hpp"
#include "rankscope/spectral.hpp"
#include "rankscope/svd.hpp"

namespace rankscope {

// ---- Partial-rank sweep ----------------------------------------------------

struct RankSweepRow {
  int depth = 0;
  int partial_rank = 0;
  int probe_size = 0;
  double epsilon = 0.0;
};

struct RankSweepResult {
  std::vector<RankSweepRow> rows;
};

inline RankSweepResult partial_rank_sweep(const NetworkSpec& net, const std::vector<double>& x,
                                          const JacobianProbe& probe, const ToleranceSpec& tol) {
  Network nw(net);
  const std::vector<Matrix> traj = nw.probe_jacobian_trajectory(x, probe);
  RankSweepResult res;
  res.rows.resize(traj.size());
  parallel_for(static_cast<int>(traj.size()), [&](int i) {
    RankSweepRow& row = res.rows[static_cast<std::size_t>(i)];
    row.depth = i + 1;
    row.partial_rank = numerical_rank(traj[static_cast<std::size_t>(i)], tol);
    row.probe_size = static_cast<int>(probe.column_indices.size());
    row.epsilon = tol.epsilon();
  });
  return res;
}

// ---- Classification dimension ----------------------------------------------

struct ClsDimConfig {
  enum class Mode { RelativeToBaseline, Absolute };
  double retention = 0.95;
  Mode mode = Mode::RelativeToBaseline;
  Matrix head;  // classes x feature_dim linear readout
};

struct ClsDimResult {
  int dim = 0;
  bool attained = false;
  double baseline_accuracy = 0.0;
  double achieved_accuracy = 0.0;
};

namespace detail {

// Argmax accuracy; ties resolve to the lowest index.
inline double argmax_accuracy(const Matrix& logits, const std::vector<int>& labels) {
  int hits = 0;
  for (int t = 0; t < logits.rows(); ++t) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits(t, j) > logits(t, best)) best = j;
    if (best == labels[static_cast<std::size_t>(t)]) ++hits;
  }
  return static_cast<double>(hits) / logits.rows();
}

}  // namespace detail

// Minimum number of leading principal components k such that classifying
// the rank-k projection Pro_k(f) = mean + V_k V_k^T (f - mean) through the
// linear head meets the retention target. Returns dim = ambient d with
// attained = false when no k does.
inline ClsDimResult cls_dim(const Matrix& features, const std::vector<int>& labels,
                            const ClsDimConfig& cfg) {
  const int n = features.rows(), d = features.cols();
  if (n < 1 || d < 1) throw input_error("cls_dim: empty feature matrix");
  if (static_cast<int>(labels.size()) != n) throw input_error("cls_dim: label count mismatch");
  if (cfg.head.cols() != d) throw input_error("cls_dim: head width mismatch");
  const int classes = cfg.head.rows();
  if (classes < 1) throw input_error("cls_dim: empty head");
  for (int l : labels)
    if (l < 0 || l >= classes) throw input_error("cls_dim: label out of range");
  if (!(cfg.retention > 0.0) || cfg.retention > 1.0)
    throw input_error("cls_dim: retention must be in (0, 1]");
  features.require_finite("cls_dim features");

  const Matrix logits_full = multiply(features, transpose(cfg.head));
  const double baseline = detail::argmax_accuracy(logits_full, labels);
  const double target =
      cfg.mode == ClsDimConfig::Mode::RelativeToBaseline ? cfg.retention * baseline : cfg.retention;

  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += features(t, j);
  for (double& v : mean) v /= n;
  Matrix centered(n, d);
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < d; ++j) centered(t, j) = features(t, j) - mean[static_cast<std::size_t>(j)];

  const SvdDecomposition dec = svd(centered);
  const int m = static_cast<int>(dec.singular_values.size());
  const Matrix coeff = multiply(centered, dec.v);       // n x m sample loadings
  const Matrix head_v = multiply(cfg.head, dec.v);      // classes x m projected head
  const std::vector<double> head_mean = multiply_vec(cfg.head, mean);

  // logits_k = head mean + sum_{j<=k} coeff_j (head v_j)^T, grown one
  // component at a time.
  Matrix logits(n, classes);
  for (int t = 0; t < n; ++t)
    for (int c = 0; c < classes; ++c) logits(t, c) = head_mean[static_cast<std::size_t>(c)];

  double acc = detail::argmax_accuracy(logits, labels);
  for (int k = 1; k <= m; ++k) {
    for (int t = 0; t < n; ++t) {
      const double g = coeff(t, k - 1);
      if (g == 0.0) continue;
      for (int c = 0; c < classes; ++c) logits(t, c) += g * head_v(c, k - 1);
    }
    acc = detail::argmax_accuracy(logits, labels);
    if (acc >= target) return {k, true, baseline, acc};
  }
  return {d, false, baseline, acc};
}

// ---- Perturbed PCA dimension -----------------------------------------------

struct PertDimConfig {
  double noise_std = 1e-3;
  int samples = 2000;
  int points = 100;  // used by callers that generate evaluation points
};

// Mean over points of the PCA dimension of the depth-k image of a Gaussian
// delta-neighborhood. The eigenvalue threshold is the float32 convention
// scaled by the sample count. depth 0 probes the input cloud itself.
inline double perturbed_pca_dim(const NetworkSpec& net, int depth,
                                const std::vector<std::vector<double>>& points,
                                const PertDimConfig& cfg, std::uint64_t seed) {
  if (!(cfg.noise_std > 0.0)) throw input_error("perturbed_pca_dim: noise_std must be positive");
  if (cfg.samples < 2) throw input_error("perturbed_pca_dim: need at least 2 samples");
  if (points.empty()) throw input_error("perturbed_pca_dim: need at least one point");
  Network nw(net);
  if (depth < 0 || depth > nw.depth()) throw input_error("perturbed_pca_dim: depth out of range");
  const int in_dim = nw.input_dim();
  const int out_dim = nw.output_dim(depth);
  const ToleranceSpec tol = ToleranceSpec::float32(cfg.samples);
  std::vector<int> dims(points.size(), 0);
  parallel_for(static_cast<int>(points.size()), [&](int p) {
    const std::vector<double>& x = points[static_cast<std::size_t>(p)];
    if (static_cast<int>(x.size()) != in_dim)
      throw input_error("perturbed_pca_dim: point width mismatch");
    GaussianStream g(substream(seed, static_cast<std::uint64_t>(p)));
    Matrix cloud(cfg.samples, out_dim);
    std::vector<double> xp(static_cast<std::size_t>(in_dim));
    for (int s = 0; s < cfg.samples; ++s) {
      for (int j = 0; j < in_dim; ++j)
        xp[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)] + cfg.noise_std * g.next();
      const std::vector<double> y = depth == 0 ? xp : nw.evaluate_at_depth(xp, depth);
      for (int j = 0; j < out_dim; ++j) cloud(s, j) = y[static_cast<std::size_t>(j)];
    }
    dims[static_cast<std::size_t>(p)] = pca_dimension(cloud, tol);
  });
  long long total = 0;
  for (int v : dims) total += v;
  return static_cast<double>(total) / static_cast<double>(points.size());
}

// Seeded standard-Gaussian evaluation points for callers without data.
inline std::vector<std::vector<double>> gaussian_points(int count, int dim, std::uint64_t seed) {
  if (count < 1 || dim < 1) throw input_error("gaussian_points: count and dim must be positive");
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(count));
  GaussianStream g(seed);
  for (auto& p : pts) {
    p.resize(static_cast<std::size_t>(dim));
    for (double& v : p) v = g.next();
  }
  return pts;
}

// ---- Structural component probe --------------------------------------------

struct StructuralProbeResult {
  int dim_before = 0;
  int dim_after = 0;
  int jacobian_rank = 0;
};

// Feeds a batch of standard-Gaussian inputs through one component and
// reports the PCA dimension on both sides plus the numerical rank of the
// component Jacobian at the first sample.
inline StructuralProbeResult structural_probe(const LayerSpec& component, int width, int batch,
                                              std::uint64_t seed, const ToleranceSpec& tol) {
  if (width < 1) throw input_error("structural_probe: width must be positive");
  if (batch < 2) throw input_error("structural_probe: batch must be at least 2");
  NetworkSpec spec;
  spec.input_dim = width;
  spec.layers = {component};
  spec.master_seed = seed;
  Network nw(spec);
  const int out_dim = nw.output_dim(1);

  GaussianStream g(substream(seed, 0x696e));  // input stream, distinct from weight streams
  Matrix inputs(batch, width);
  for (double& v : inputs.data()) v = g.next();
  Matrix outputs(batch, out_dim);
  std::vector<double> x(static_cast<std::size_t>(width));
  for (int t = 0; t < batch; ++t) {
    for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(j)] = inputs(t, j);
    const std::vector<double> y = nw.evaluate_at_depth(x, 1);
    for (int j = 0; j < out_dim; ++j) outputs(t, j) = y[static_cast<std::size_t>(j)];
  }

  StructuralProbeResult res;
  res.dim_before = pca_dimension(inputs, tol);
  res.dim_after = pca_dimension(outputs, tol);
  for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(j)] = inputs(0, j);
  res.jacobian_rank = numerical_rank(nw.layer_jacobian(0, x), tol);
  return res;
}

// ---- Linear-chain experiment -------------------------------------------------

struct ChainDepthRow {
  int depth = 0;
  int jac_rank = 0;
  int cov_rank = 0;
};

// Purely linear Gaussian chain (std 1/sqrt(n) per layer): per depth, the
// numerical rank of the end-to-end Jacobian and of the feature covariance
// over a Gaussian input batch of max(256, n + 56) samples.
inline std::vector<ChainDepthRow> linear_chain_experiment(int n, int depth, std::uint64_t seed,
                                                          const ToleranceSpec& tol) {
  if (n < 1 || n > 1024) throw input_error("linear_chain_experiment: width must be in [1, 1024]");
  if (depth < 1 || depth > 64) throw input_error("linear_chain_experiment: depth must be in [1, 64]");
  NetworkSpec spec;
  spec.input_dim = n;
  spec.master_seed = seed;
  const double std_scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int l = 0; l < depth; ++l) spec.layers.push_back(dense_gaussian(n, 0, std_scale));
  Network nw(spec);

  const std::vector<double> origin(static_cast<std::size_t>(n), 0.0);
  JacobianProbe all;
  all.column_indices.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) all.column_indices[static_cast<std::size_t>(j)] = j;
  const std::vector<Matrix> jac = nw.probe_jacobian_trajectory(origin, all);

  const int batch = std::max(256, n + 56);
  GaussianStream g(substream(seed, 0xba7c4));  // batch stream, distinct from weight streams
  std::vector<std::vector<std::vector<double>>> feats(static_cast<std::size_t>(batch));
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int t = 0; t < batch; ++t) {
    for (double& v : x) v = g.next();
    feats[static_cast<std::size_t>(t)] = nw.evaluate(x);
  }

  std::vector<ChainDepthRow> rows(static_cast<std::size_t>(depth));
  parallel_for(depth, [&](int k) {
    ChainDepthRow& row = rows[static_cast<std::size_t>(k)];
    row.depth = k + 1;
    row.jac_rank = numerical_rank(jac[static_cast<std::size_t>(k)], tol);
    Matrix layer_feats(batch, n);
    for (int t = 0; t < batch; ++t)
      for (int j = 0; j < n; ++j)
        layer_feats(t, j) = feats[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]
                                 [static_cast<std::size_t>(j)];
    std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
    for (int t = 0; t < batch; ++t)
      for (int j = 0; j < n; ++j) mean[static_cast<std::size_t>(j)] += layer_feats(t, j);
    for (double& v : mean) v /= batch;
    for (int t = 0; t < batch; ++t)
      for (int j = 0; j < n; ++j) layer_feats(t, j) -= mean[static_cast<std::size_t>(j)];
    Matrix cov = multiply(transpose(layer_feats), layer_feats);
    for (double& v : cov.data()) v /= (batch - 1);
    row.cov_rank = numerical_rank(cov, tol);
  });
  return rows;
}

// ---- Rank-deficiency probability ---------------------------------------------

struct ProbabilityEstimate {
  double epsilon = 0.0;
  double estimate = 0.0;
  double stderr_est = 0.0;
  int trials = 0;
};

// One SVD pass per Gaussian sample, counted against every epsilon.
inline std::vector<ProbabilityEstimate> rank_deficiency_probabilities(
    int rows, int cols, const std::vector<double>& epsilons, int trials, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw input_error("rank_deficiency: dimensions must be positive");
  if (trials < 1) throw input_error("rank_deficiency: trials must be positive");
  if (epsilons.empty()) throw input_error("rank_deficiency: need at least one epsilon");
  for (double e : epsilons)
    if (!(e >= 0.0)) throw input_error("rank_deficiency: epsilon must be >= 0");
  const int full = std::min(rows, cols);
  std::vector<std::vector<std::uint8_t>> deficient(
      static_cast<std::size_t>(trials), std::vector<std::uint8_t>(epsilons.size(), 0));
  parallel_for(trials, [&](int t) {
    GaussianStream g(substream(seed, static_cast<std::uint64_t>(t)));
    Matrix m(rows, cols);
    for (double& v : m.data()) v = g.next();
    const std::vector<double> sv = singular_values(m);
    for (std::size_t e = 0; e < epsilons.size(); ++e)
      deficient[static_cast<std::size_t>(t)][e] =
          count_at_relative_threshold(sv, epsilons[e]) < full ? 1 : 0;
  });
  std::vector<ProbabilityEstimate> out(epsilons.size());
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    int hits = 0;
    for (int t = 0; t < trials; ++t) hits += deficient[static_cast<std::size_t>(t)][e];
    const double p = static_cast<double>(hits) / trials;
    out[e] = {epsilons[e], p, std::sqrt(p * (1.0 - p) / trials), trials};
  }
  return out;
}

inline ProbabilityEstimate rank_deficiency_probability(int rows, int cols, double epsilon,
                                                       int trials, std::uint64_t seed) {
  return rank_deficiency_probabilities(rows, cols, {epsilon}, trials, seed).front();
}

}  // namespace rankscope
