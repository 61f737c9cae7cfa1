// Dense SVD via one-sided Jacobi (Hestenes), plus Householder QR.
//
// One-sided Jacobi is slower than bidiagonalization methods but has two
// properties this library leans on: high relative accuracy for small singular
// values of graded matrices, and a completely deterministic, platform-pinned
// sweep order. The kernel is templated on the scalar so the test suite can
// instantiate it at __float128 as an independent oracle.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"

namespace rankscope {

// Scalar operations the Jacobi kernel needs. Specialize for non-standard
// reals (the test suite provides a __float128 specialization).
template <class Real>
struct real_ops {
  static Real sqrt(Real x) { return std::sqrt(x); }
  static Real abs(Real x) { return std::abs(x); }
  // Relative threshold below which two columns count as orthogonal. Must sit
  // above the rounding noise of an m-term dot product (about m * eps in the
  // worst case), or noise-level rotations can stall convergence.
  static Real jacobi_tol(int m) { return Real(16 + m) * Real(2.3e-16); }
};

namespace detail {

// Column-major working storage so Jacobi's column dots and rotations are
// stride-1.
template <class Real>
struct ColMat {
  int m = 0, n = 0;
  std::vector<Real> a;
  ColMat(int m_, int n_) : m(m_), n(n_), a(static_cast<std::size_t>(m_) * n_, Real(0)) {}
  Real* col(int j) { return a.data() + static_cast<std::size_t>(j) * m; }
  const Real* col(int j) const { return a.data() + static_cast<std::size_t>(j) * m; }
};

template <class Real>
Real col_dot(const Real* x, const Real* y, int m) {
  Real s(0);
  for (int i = 0; i < m; ++i) s += x[i] * y[i];
  return s;
}

// Orthogonalize the columns of `a` by plane rotations; optionally accumulate
// the rotations into `v` (n x n, must start as identity). After convergence
// the columns of `a` are mutually orthogonal and their norms are the
// singular values.
template <class Real>
void hestenes(ColMat<Real>& a, ColMat<Real>* v, int max_sweeps = 60) {
  const int m = a.m, n = a.n;
  const Real tol = real_ops<Real>::jacobi_tol(m);
  // Deflation floor for collapsed columns, relative to the largest column.
  const Real drop2 = Real(m) * tol * (Real(m) * tol);
  std::vector<Real> norms2(static_cast<std::size_t>(n));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (int j = 0; j < n; ++j) norms2[j] = col_dot(a.col(j), a.col(j), m);
    // If the input has exactly dependent columns, rotations shrink some
    // column down to rounding noise. That noise points in an arbitrary
    // direction, so it never passes the orthogonality test below and the
    // sweep loop would stall. Zeroing such columns perturbs the matrix by
    // at most a roundoff multiple of its spectral norm.
    Real maxn(0);
    for (int j = 0; j < n; ++j) maxn = std::max(maxn, norms2[j]);
    for (int j = 0; j < n; ++j) {
      if (norms2[j] > Real(0) && norms2[j] <= drop2 * maxn) {
        Real* aj = a.col(j);
        for (int i = 0; i < m; ++i) aj[i] = Real(0);
        norms2[j] = Real(0);
      }
    }
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const Real alpha = norms2[p], beta = norms2[q];
        if (alpha == Real(0) || beta == Real(0)) continue;
        Real* ap = a.col(p);
        Real* aq = a.col(q);
        const Real gamma = col_dot(ap, aq, m);
        if (real_ops<Real>::abs(gamma) <=
            tol * real_ops<Real>::sqrt(alpha) * real_ops<Real>::sqrt(beta))
          continue;
        rotated = true;
        // Rutishauser's stable rotation zeroing the Gram off-diagonal.
        const Real tau = (beta - alpha) / (Real(2) * gamma);
        const Real t = (tau >= Real(0) ? Real(1) : Real(-1)) /
                       (real_ops<Real>::abs(tau) + real_ops<Real>::sqrt(Real(1) + tau * tau));
        const Real c = Real(1) / real_ops<Real>::sqrt(Real(1) + t * t);
        const Real s = c * t;
        for (int i = 0; i < m; ++i) {
          const Real x = ap[i], y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        norms2[p] = alpha - t * gamma;
        norms2[q] = beta + t * gamma;
        if (norms2[p] < Real(0)) norms2[p] = Real(0);
        if (norms2[q] < Real(0)) norms2[q] = Real(0);
        if (v) {
          Real* vp = v->col(p);
          Real* vq = v->col(q);
          for (int i = 0; i < v->m; ++i) {
            const Real x = vp[i], y = vq[i];
            vp[i] = c * x - s * y;
            vq[i] = s * x + c * y;
          }
        }
      }
    }
    if (!rotated) return;
  }
  throw compute_error("one-sided jacobi svd did not converge");
}

}  // namespace detail

struct SvdDecomposition {
  std::vector<double> singular_values;  // sorted descending, length min(m, n)
  Matrix u;  // m x min(m,n); columns are zero where the singular value is zero
  Matrix v;  // n x min(m,n)
};

// Singular values only, sorted descending.
inline std::vector<double> singular_values(const Matrix& mat) {
  mat.require_finite("singular_values");
  const bool flip = mat.rows() < mat.cols();
  const Matrix& src = mat;
  const int m = flip ? mat.cols() : mat.rows();
  const int n = flip ? mat.rows() : mat.cols();
  detail::ColMat<double> a(m, n);
  for (int i = 0; i < src.rows(); ++i)
    for (int j = 0; j < src.cols(); ++j) {
      if (flip)
        a.col(i)[j] = src(i, j);
      else
        a.col(j)[i] = src(i, j);
    }
  detail::hestenes<double>(a, nullptr);
  std::vector<double> sv(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) sv[j] = std::sqrt(detail::col_dot(a.col(j), a.col(j), m));
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

// Full decomposition. U's columns corresponding to zero singular values are
// left as zero vectors; V is always orthonormal.
inline SvdDecomposition svd(const Matrix& mat) {
  mat.require_finite("svd");
  const bool flip = mat.rows() < mat.cols();
  const int m = flip ? mat.cols() : mat.rows();
  const int n = flip ? mat.rows() : mat.cols();
  detail::ColMat<double> a(m, n);
  for (int i = 0; i < mat.rows(); ++i)
    for (int j = 0; j < mat.cols(); ++j) {
      if (flip)
        a.col(i)[j] = mat(i, j);
      else
        a.col(j)[i] = mat(i, j);
    }
  detail::ColMat<double> v(n, n);
  for (int j = 0; j < n; ++j) v.col(j)[j] = 1.0;
  detail::hestenes<double>(a, &v);

  std::vector<double> sv(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) sv[j] = std::sqrt(detail::col_dot(a.col(j), a.col(j), m));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sv[x] > sv[y]; });

  Matrix bigu(m, n), bigv(n, n);
  std::vector<double> sorted(static_cast<std::size_t>(n));
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[static_cast<std::size_t>(jj)];
    sorted[static_cast<std::size_t>(jj)] = sv[static_cast<std::size_t>(j)];
    const double s = sv[static_cast<std::size_t>(j)];
    for (int i = 0; i < m; ++i) bigu(i, jj) = s > 0.0 ? a.col(j)[i] / s : 0.0;
    for (int i = 0; i < n; ++i) bigv(i, jj) = v.col(j)[i];
  }
  SvdDecomposition out;
  out.singular_values = std::move(sorted);
  if (flip) {
    out.u = std::move(bigv);
    out.v = std::move(bigu);
  } else {
    out.u = std::move(bigu);
    out.v = std::move(bigv);
  }
  return out;
}

struct QrResult {
  Matrix q;  // n x n orthogonal
  Matrix r;  // n x n upper triangular, non-negative diagonal
};

// Householder QR of a square matrix with the diagonal of R made non-negative
// (signs absorbed into Q), so log R_ii is well-defined for full-rank input.
inline QrResult qr_positive(const Matrix& mat) {
  if (mat.rows() != mat.cols()) throw input_error("qr_positive: square matrix required");
  const int n = mat.rows();
  Matrix r = mat;
  Matrix q = identity(n);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n - 1; ++k) {
    double norm2 = 0.0;
    for (int i = k; i < n; ++i) norm2 += r(i, k) * r(i, k);
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    const double alpha = r(k, k) >= 0.0 ? -norm : norm;
    double vnorm2 = 0.0;
    for (int i = k; i < n; ++i) {
      v[static_cast<std::size_t>(i)] = r(i, k);
      if (i == k) v[static_cast<std::size_t>(i)] -= alpha;
      vnorm2 += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
    }
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;
    // R <- H R
    for (int j = k; j < n; ++j) {
      double dot = 0.0;
      for (int i = k; i < n; ++i) dot += v[static_cast<std::size_t>(i)] * r(i, j);
      dot *= beta;
      for (int i = k; i < n; ++i) r(i, j) -= dot * v[static_cast<std::size_t>(i)];
    }
    // Q <- Q H
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = k; j < n; ++j) dot += q(i, j) * v[static_cast<std::size_t>(j)];
      dot *= beta;
      for (int j = k; j < n; ++j) q(i, j) -= dot * v[static_cast<std::size_t>(j)];
    }
  }
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) r(i, j) = 0.0;
  for (int i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) {
      for (int j = i; j < n; ++j) r(i, j) = -r(i, j);
      for (int k2 = 0; k2 < n; ++k2) q(k2, i) = -q(k2, i);
    }
  }
  return {std::move(q), std::move(r)};
}

}  // namespace rankscope
