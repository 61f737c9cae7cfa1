// Tolerance-based numerical rank, spectral summaries, Weyl perturbation
// budgets, elimination-based exact rank, and PCA dimension.
//
// Numerical rank of W at tolerance eps counts the singular values with
// sigma_i >= eps * ||W||_2. The zero matrix has spectral norm 0 and rank 0
// by convention (the ratio definition is vacuous there).
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"
#include "rankscope/svd.hpp"

namespace rankscope {

// Single-precision machine epsilon, rounded to three digits: the float32
// convention resolves eps = 1.19e-7 * N for a caller-chosen count N.
inline constexpr double kFloat32Eps = 1.19e-7;

class ToleranceSpec {
 public:
  static ToleranceSpec relative(double eps) {
    if (!(eps > 0.0)) throw input_error("ToleranceSpec: epsilon must be positive");
    return ToleranceSpec(eps, false, 0);
  }
  static ToleranceSpec float32(long long count) {
    if (count <= 0) throw input_error("ToleranceSpec: float32 count must be positive");
    return ToleranceSpec(kFloat32Eps * static_cast<double>(count), true, count);
  }

  double epsilon() const { return eps_; }
  bool is_float32_convention() const { return f32_; }
  long long count() const { return count_; }

 private:
  ToleranceSpec(double eps, bool f32, long long count) : eps_(eps), f32_(f32), count_(count) {}
  double eps_;
  bool f32_;
  long long count_;
};

// Count of values >= eps * values[0], assuming `values` sorted descending.
// Shared by every rank computation, including the eps = 0 probability
// estimator which bypasses ToleranceSpec validation.
inline int count_at_relative_threshold(const std::vector<double>& values, double eps) {
  if (values.empty() || values.front() <= 0.0) return 0;
  const double thresh = eps * values.front();
  int count = 0;
  for (double v : values)
    if (v >= thresh) ++count;
  return count;
}

struct SpectralSummary {
  std::vector<double> singular_values;
  double spectral_norm = 0.0;
  ToleranceSpec tolerance = ToleranceSpec::relative(1.0);
  int numerical_rank = 0;
};

inline SpectralSummary spectral_summary(const Matrix& m, const ToleranceSpec& tol) {
  SpectralSummary s;
  s.singular_values = singular_values(m);
  s.spectral_norm = s.singular_values.empty() ? 0.0 : s.singular_values.front();
  s.tolerance = tol;
  s.numerical_rank = count_at_relative_threshold(s.singular_values, tol.epsilon());
  return s;
}

inline int numerical_rank(const Matrix& m, const ToleranceSpec& tol) {
  return count_at_relative_threshold(singular_values(m), tol.epsilon());
}

// Largest perturbation scale delta such that numerical_rank(w + delta*d, eps)
// provably equals numerical_rank(w, eps) for all delta in [0, delta_max),
// via the four-term Weyl-inequality minimum. Terms involving sigma_{r+1}
// drop out when r = min(rows, cols). Requires eps to stay clear of every
// ratio sigma_i/sigma_1 (a zero-measure degenerate set, rejected with a
// relative guard band of 1e-12).
inline double perturbation_budget(const Matrix& w, const Matrix& d, double eps) {
  if (w.rows() != d.rows() || w.cols() != d.cols())
    throw input_error("perturbation_budget: shape mismatch");
  if (!(eps > 0.0)) throw input_error("perturbation_budget: epsilon must be positive");
  const std::vector<double> sw = singular_values(w);
  const double s1 = sw.front();
  if (s1 > 0.0) {
    for (double si : sw) {
      const double ratio = si / s1;
      if (std::abs(eps - ratio) <= 1e-12 * std::max(eps, ratio))
        throw compute_error("perturbation_budget: degenerate tolerance (eps within guard band of a singular value ratio)");
    }
  }
  const std::vector<double> sd = singular_values(d);
  const double d1 = sd.front();
  if (d1 == 0.0) return std::numeric_limits<double>::infinity();
  if (s1 == 0.0) return 0.0;  // any perturbation of the zero matrix creates rank

  const int minmn = static_cast<int>(sw.size());
  const int r = count_at_relative_threshold(sw, eps);
  if (r == 0) return std::numeric_limits<double>::infinity();  // eps > 1: rank is 0 for every matrix
  const double sr = sw[static_cast<std::size_t>(r - 1)];
  double delta = std::min((sr + s1) / (eps + 1.0) - s1, sr / 2.0);
  if (r < minmn) {
    const double sr1 = sw[static_cast<std::size_t>(r)];
    delta = std::min(delta, s1 - (sr1 + s1) / (eps + 1.0));
    delta = std::min(delta, s1 / 2.0);
  }
  return delta / d1;
}

// Exact rank of a small matrix by Gaussian elimination with partial
// pivoting: pivots with magnitude >= pivot_tol * (largest initial entry)
// count toward the rank. A test oracle, limited to min dimension 64.
inline int exact_rank(const Matrix& m, double pivot_tol) {
  if (std::min(m.rows(), m.cols()) > 64)
    throw input_error("exact_rank: oracle limited to min dimension 64");
  if (!(pivot_tol > 0.0)) throw input_error("exact_rank: pivot_tol must be positive");
  Matrix a = m;
  const double scale = max_abs(a);
  if (scale == 0.0) return 0;
  const double thresh = pivot_tol * scale;
  const int rows = a.rows(), cols = a.cols();
  int rank = 0;
  int row = 0;
  for (int col = 0; col < cols && row < rows; ++col) {
    int piv = row;
    for (int i = row + 1; i < rows; ++i)
      if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
    if (std::abs(a(piv, col)) < thresh) continue;
    if (piv != row)
      for (int j = col; j < cols; ++j) std::swap(a(row, j), a(piv, j));
    for (int i = row + 1; i < rows; ++i) {
      const double f = a(i, col) / a(row, col);
      if (f == 0.0) continue;
      for (int j = col; j < cols; ++j) a(i, j) -= f * a(row, j);
    }
    ++rank;
    ++row;
  }
  return rank;
}

// PCA dimension: center the samples, take covariance eigenvalues from the
// SVD of the centered matrix (unbiased N-1 divisor), count the eigenvalues
// at or above the resolved tolerance times the largest one.
inline int pca_dimension(const Matrix& data, const ToleranceSpec& tol) {
  const int n = data.rows(), d = data.cols();
  if (n < 2) throw input_error("pca_dimension: at least two samples required");
  Matrix centered = data;
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += data(i, j);
    mean /= n;
    for (int i = 0; i < n; ++i) centered(i, j) -= mean;
  }
  std::vector<double> sv = singular_values(centered);
  for (double& v : sv) v = v * v / static_cast<double>(n - 1);
  return count_at_relative_threshold(sv, tol.epsilon());
}

}  // namespace rankscope
