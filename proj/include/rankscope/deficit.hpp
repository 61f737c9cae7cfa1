// Independence-deficit analysis: coordinate-descent Lasso over logit columns
// with the target coefficient pinned to -1, logit reconstruction from the
// solution, and argmax accuracy scoring of the substitution.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"

namespace rankscope {

struct DeficitProblem {
  Matrix logits;  // N samples x C categories
  int target = 0;
  double eta = 0.0;
  int max_iterations = 10000;
  double tol = 1e-8;
};

struct DeficitSolution {
  int target = 0;
  double eta = 0.0;
  std::vector<double> coefficients;  // lambda, coefficients[target] = -1
  std::vector<int> support;          // j != target with nonzero coefficient
  std::vector<int> zero_variance;    // columns fixed at 0 (a_j = 0)
  double objective = 0.0;
  std::vector<double> objective_history;  // value after each full sweep
  int iterations = 0;
  bool converged = false;
};

// Minimizes (1/N) sum_t (lambda^T z_t)^2 + eta sum_{j != i} |lambda_j| with
// lambda_i = -1, by cyclic coordinate descent. Each coordinate update is the
// exact scalar minimizer lambda_j <- S(c_j, eta) / a_j with
// a_j = (2/N) sum z_{tj}^2 and c_j = -(2/N) z_j . r + lambda_j a_j over the
// running residual r_t = lambda^T z_t, so the objective never increases.
inline DeficitSolution solve_deficit(const DeficitProblem& p) {
  const int n = p.logits.rows(), c = p.logits.cols();
  if (n < 1 || c < 1) throw input_error("deficit: empty logit matrix");
  if (p.target < 0 || p.target >= c) throw input_error("deficit: target index out of range");
  if (!(p.eta >= 0.0)) throw input_error("deficit: eta must be >= 0");
  if (p.max_iterations < 1) throw input_error("deficit: max_iterations must be positive");
  if (!(p.tol > 0.0)) throw input_error("deficit: tol must be positive");
  p.logits.require_finite("deficit logits");

  DeficitSolution sol;
  sol.target = p.target;
  sol.eta = p.eta;
  sol.coefficients.assign(static_cast<std::size_t>(c), 0.0);
  sol.coefficients[static_cast<std::size_t>(p.target)] = -1.0;

  std::vector<double> a(static_cast<std::size_t>(c), 0.0);
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < c; ++j) a[static_cast<std::size_t>(j)] += p.logits(t, j) * p.logits(t, j);
  for (double& v : a) v *= 2.0 / n;
  for (int j = 0; j < c; ++j)
    if (j != p.target && a[static_cast<std::size_t>(j)] == 0.0) sol.zero_variance.push_back(j);

  std::vector<double> residual(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) residual[static_cast<std::size_t>(t)] = -p.logits(t, p.target);

  const auto objective = [&]() {
    double quad = 0.0;
    for (double r : residual) quad += r * r;
    quad /= n;
    double l1 = 0.0;
    for (int j = 0; j < c; ++j)
      if (j != p.target) l1 += std::abs(sol.coefficients[static_cast<std::size_t>(j)]);
    return quad + p.eta * l1;
  };

  for (int sweep = 1; sweep <= p.max_iterations; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < c; ++j) {
      if (j == p.target || a[static_cast<std::size_t>(j)] == 0.0) continue;
      const double old = sol.coefficients[static_cast<std::size_t>(j)];
      double dot = 0.0;
      for (int t = 0; t < n; ++t) dot += p.logits(t, j) * residual[static_cast<std::size_t>(t)];
      const double cj = -(2.0 / n) * dot + old * a[static_cast<std::size_t>(j)];
      const double mag = std::abs(cj) - p.eta;
      const double next = mag > 0.0 ? (cj > 0.0 ? mag : -mag) / a[static_cast<std::size_t>(j)] : 0.0;
      const double delta = next - old;
      if (delta != 0.0) {
        sol.coefficients[static_cast<std::size_t>(j)] = next;
        for (int t = 0; t < n; ++t) residual[static_cast<std::size_t>(t)] += delta * p.logits(t, j);
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    sol.objective_history.push_back(objective());
    sol.iterations = sweep;
    if (max_change < p.tol) {
      sol.converged = true;
      break;
    }
  }

  for (int j = 0; j < c; ++j) {
    if (j == p.target) continue;
    double& v = sol.coefficients[static_cast<std::size_t>(j)];
    if (std::abs(v) < 1e-10) v = 0.0;
    if (v != 0.0) sol.support.push_back(j);
  }
  // Rebuild the residual from the reported (floored) coefficients so the
  // objective matches the published solution exactly.
  for (int t = 0; t < n; ++t) {
    double r = 0.0;
    for (int j = 0; j < c; ++j) r += sol.coefficients[static_cast<std::size_t>(j)] * p.logits(t, j);
    residual[static_cast<std::size_t>(t)] = r;
  }
  sol.objective = objective();
  return sol;
}

// Linear prediction of the target column: sum_{j != target} lambda_j z_{tj}.
inline std::vector<double> reconstruct_logits(const Matrix& logits, const DeficitSolution& sol) {
  if (static_cast<int>(sol.coefficients.size()) != logits.cols())
    throw input_error("reconstruct: coefficient count mismatch");
  if (sol.target < 0 || sol.target >= logits.cols())
    throw input_error("reconstruct: target out of range");
  std::vector<double> out(static_cast<std::size_t>(logits.rows()), 0.0);
  for (int t = 0; t < logits.rows(); ++t) {
    double acc = 0.0;
    for (int j = 0; j < logits.cols(); ++j)
      if (j != sol.target) acc += sol.coefficients[static_cast<std::size_t>(j)] * logits(t, j);
    out[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

struct DeficitAccuracy {
  double substituted = 0.0;
  double original = 0.0;
  double positive_substituted = 0.0;  // over samples with label == target
  double positive_original = 0.0;
  int positive_count = 0;
};

inline DeficitAccuracy deficit_accuracy(const Matrix& logits, const std::vector<int>& labels,
                                        const DeficitSolution& sol) {
  const int n = logits.rows(), c = logits.cols();
  const int target = sol.target;
  if (static_cast<int>(labels.size()) != n) throw input_error("deficit accuracy: label count mismatch");
  for (int l : labels)
    if (l < 0 || l >= c) throw input_error("deficit accuracy: label out of range");
  const std::vector<double> recon = reconstruct_logits(logits, sol);

  DeficitAccuracy acc;
  int orig_hits = 0, sub_hits = 0, pos_orig = 0, pos_sub = 0;
  for (int t = 0; t < n; ++t) {
    int best_orig = 0, best_sub = 0;
    for (int j = 1; j < c; ++j) {
      if (logits(t, j) > logits(t, best_orig)) best_orig = j;
      const double vj = j == target ? recon[static_cast<std::size_t>(t)] : logits(t, j);
      const double vb = best_sub == target ? recon[static_cast<std::size_t>(t)] : logits(t, best_sub);
      if (vj > vb) best_sub = j;
    }
    const int label = labels[static_cast<std::size_t>(t)];
    if (best_orig == label) ++orig_hits;
    if (best_sub == label) ++sub_hits;
    if (label == target) {
      ++acc.positive_count;
      if (best_orig == label) ++pos_orig;
      if (best_sub == label) ++pos_sub;
    }
  }
  acc.original = static_cast<double>(orig_hits) / n;
  acc.substituted = static_cast<double>(sub_hits) / n;
  acc.positive_original =
      acc.positive_count ? static_cast<double>(pos_orig) / acc.positive_count : 0.0;
  acc.positive_substituted =
      acc.positive_count ? static_cast<double>(pos_sub) / acc.positive_count : 0.0;
  return acc;
}

}  // namespace rankscope
