// Lyapunov spectra of products of random Gaussian matrices: closed-form
// digamma theory, an exact log-domain accumulator for finite-depth products,
// Monte Carlo spectrum estimation, and the rank-collapse depth prediction.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"
#include "rankscope/parallel.hpp"
#include "rankscope/rng.hpp"
#include "rankscope/svd.hpp"

namespace rankscope {

// Standard digamma (derivative of log-Gamma). Arguments are pushed up to
// x >= 10 by psi(x) = psi(x+1) - 1/x, then the asymptotic series
// psi(x) ~ ln x - 1/(2x) - sum B_{2m} / (2m x^{2m}) is summed through
// B_14, whose first omitted term is below 1e-15 at x = 10.
inline double digamma(double x) {
  if (!(x > 0.0)) throw input_error("digamma: argument must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // B_2/2 = 1/12, B_4/4 = -1/120, B_6/6 = 1/252, B_8/8 = -1/240,
  // B_10/10 = 1/132, B_12/12 = -691/32760, B_14/14 = 1/12.
  double series = 0.0;
  series = 1.0 / 12.0;
  series = series * inv2 - 1.0 / 132.0;   // build backwards via Horner
  series = series * inv2 + 691.0 / 32760.0;
  series = series * inv2 - 1.0 / 240.0;
  series = series * inv2 + 1.0 / 252.0;
  series = series * inv2 - 1.0 / 120.0;
  series = series * inv2 + 1.0 / 12.0;
  return acc + std::log(x) - 0.5 * inv - series * inv2;
}

// lambda_k = (1/2) (ln 2 + psi((n - k + 1)/2)), k = 1..n, strictly
// decreasing.
inline std::vector<double> theory_spectrum(int n) {
  if (n < 1) throw input_error("theory_spectrum: n must be >= 1");
  std::vector<double> lambda(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k)
    lambda[static_cast<std::size_t>(k - 1)] =
        0.5 * (std::log(2.0) + digamma(0.5 * (n - k + 1)));
  return lambda;
}

// lim (sigma_k / sigma_1)^{1/L} = exp((1/2)(psi((n-k+1)/2) - psi(n/2))),
// in (0,1) for k >= 2.
inline double theory_ratio_rate(int n, int k) {
  if (n < 2 || k < 2 || k > n) throw input_error("theory_ratio_rate: need 2 <= k <= n");
  return std::exp(0.5 * (digamma(0.5 * (n - k + 1)) - digamma(0.5 * n)));
}

struct ChainConfig {
  int n = 2;
  int depth = 1;
  int trials = 1;
  std::uint64_t seed = 0;
};

inline void validate_chain_config(const ChainConfig& cfg) {
  if (cfg.n < 1) throw input_error("chain config: n must be positive");
  if (cfg.depth < 1) throw input_error("chain config: depth must be positive");
  if (cfg.trials < 1) throw input_error("chain config: trials must be positive");
}

namespace detail {

// Exact finite-depth accumulator for P = G_L ... G_1, maintained as
// P = Q diag(e^s) U with Q orthonormal, s log scales, U unit upper
// triangular with O(1) entries. One step absorbs a new left factor G:
// QR-factorize G Q = Qhat Rhat (positive diagonal), then
//   U''_ij = (Rhat_ij / Rhat_ii) e^{s_j - s_i}   (old s),
//   U <- U'' U,   s_i <- s_i + ln Rhat_ii.
// The orthonormal frame is re-orthonormalized every step and the log of the
// triangular diagonal is summed into s; U carries the residual coupling that
// makes log sigma_k recoverable exactly rather than asymptotically.
class QduAccumulator {
 public:
  explicit QduAccumulator(int n)
      : n_(n), q_(identity(n)), u_(identity(n)), s_(static_cast<std::size_t>(n), 0.0) {}

  void multiply_left(const Matrix& g) {
    if (g.rows() != n_ || g.cols() != n_)
      throw input_error("chain accumulator: factor must be n x n");
    QrResult qr = qr_positive(multiply(g, q_));
    Matrix uu(n_, n_);
    for (int i = 0; i < n_; ++i) {
      const double rii = qr.r(i, i);
      if (rii <= 0.0)
        throw compute_error("chain accumulator: singular step factor (zero QR pivot)");
      uu(i, i) = 1.0;
      for (int j = i + 1; j < n_; ++j)
        uu(i, j) = qr.r(i, j) / rii *
                   std::exp(s_[static_cast<std::size_t>(j)] - s_[static_cast<std::size_t>(i)]);
    }
    // u <- uu * u, both unit upper triangular.
    Matrix nu(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        double acc = 0.0;
        for (int k = i; k <= j; ++k) acc += uu(i, k) * u_(k, j);
        nu(i, j) = acc;
      }
    u_ = std::move(nu);
    for (int i = 0; i < n_; ++i) s_[static_cast<std::size_t>(i)] += std::log(qr.r(i, i));
    q_ = std::move(qr.q);
  }

  // log sigma_k of the accumulated product, descending. Q is orthogonal so
  // sigma(P) = sigma(diag(e^s) U) = sigma(U^T diag(e^s)), whose column j is
  // the single-scale vector e^{s_j} (row j of U). A one-sided Jacobi run on
  // (log-scale, unit-direction) column pairs then never forms an
  // under/overflowing number.
  std::vector<double> log_singular_values() const {
    std::vector<std::vector<double>> w(static_cast<std::size_t>(n_));
    std::vector<double> c(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) {
      std::vector<double> row(static_cast<std::size_t>(n_));
      double nrm2 = 0.0;
      for (int k = 0; k < n_; ++k) {
        row[static_cast<std::size_t>(k)] = u_(j, k);
        nrm2 += u_(j, k) * u_(j, k);
      }
      const double nrm = std::sqrt(nrm2);
      for (double& v : row) v /= nrm;
      w[static_cast<std::size_t>(j)] = std::move(row);
      c[static_cast<std::size_t>(j)] = s_[static_cast<std::size_t>(j)] + std::log(nrm);
    }
    scaled_jacobi(w, c);
    std::sort(c.begin(), c.end(), std::greater<double>());
    return c;
  }

 private:
  // One-sided Jacobi over columns represented as exp(c_j) * w_j with w_j
  // unit. Pairs with log-scale gap above 50 use the limiting rotation (a
  // Gram-Schmidt step on the small column), exact to O(e^{-2 gap}); the
  // rest use the standard Rutishauser rotation evaluated at the pair's
  // common scale.
  static void scaled_jacobi(std::vector<std::vector<double>>& w, std::vector<double>& c) {
    const int n = static_cast<int>(c.size());
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double off = 0.0;
      for (int i = 0; i < n - 1; ++i)
        for (int j = i + 1; j < n; ++j) {
          int hi = i, lo = j;
          if (c[static_cast<std::size_t>(lo)] > c[static_cast<std::size_t>(hi)]) std::swap(hi, lo);
          std::vector<double>& wi = w[static_cast<std::size_t>(hi)];
          std::vector<double>& wj = w[static_cast<std::size_t>(lo)];
          double d = 0.0;
          for (int k = 0; k < n; ++k) d += wi[static_cast<std::size_t>(k)] * wj[static_cast<std::size_t>(k)];
          off = std::max(off, std::abs(d));
          if (std::abs(d) <= 1e-15) continue;
          const double gap = c[static_cast<std::size_t>(hi)] - c[static_cast<std::size_t>(lo)];
          if (gap > 50.0) {
            double nrm2 = 0.0;
            for (int k = 0; k < n; ++k) {
              wj[static_cast<std::size_t>(k)] -= d * wi[static_cast<std::size_t>(k)];
              nrm2 += wj[static_cast<std::size_t>(k)] * wj[static_cast<std::size_t>(k)];
            }
            const double nrm = std::sqrt(nrm2);
            if (nrm == 0.0) {
              c[static_cast<std::size_t>(lo)] = -std::numeric_limits<double>::infinity();
              continue;
            }
            for (int k = 0; k < n; ++k) wj[static_cast<std::size_t>(k)] /= nrm;
            c[static_cast<std::size_t>(lo)] += std::log(nrm);
          } else {
            // Columns at the common scale e^{c_hi}: u = wi, v = e^{-gap} wj.
            const double es = std::exp(-gap);
            const double alpha = 1.0, beta = es * es, gamma = d * es;
            const double zeta = (beta - alpha) / (2.0 * gamma);
            const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                             (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
            const double cs = 1.0 / std::sqrt(1.0 + t * t);
            const double sn = cs * t;
            double ni2 = 0.0, nj2 = 0.0;
            for (int k = 0; k < n; ++k) {
              const double a = wi[static_cast<std::size_t>(k)];
              const double b = es * wj[static_cast<std::size_t>(k)];
              const double na = cs * a - sn * b;
              const double nb = sn * a + cs * b;
              wi[static_cast<std::size_t>(k)] = na;
              wj[static_cast<std::size_t>(k)] = nb;
              ni2 += na * na;
              nj2 += nb * nb;
            }
            const double ni = std::sqrt(ni2), nj = std::sqrt(nj2);
            const double base = c[static_cast<std::size_t>(hi)];
            if (ni == 0.0) {
              c[static_cast<std::size_t>(hi)] = -std::numeric_limits<double>::infinity();
            } else {
              for (int k = 0; k < n; ++k) wi[static_cast<std::size_t>(k)] /= ni;
              c[static_cast<std::size_t>(hi)] = base + std::log(ni);
            }
            if (nj == 0.0) {
              c[static_cast<std::size_t>(lo)] = -std::numeric_limits<double>::infinity();
            } else {
              for (int k = 0; k < n; ++k) wj[static_cast<std::size_t>(k)] /= nj;
              c[static_cast<std::size_t>(lo)] = base + std::log(nj);
            }
          }
        }
      if (off <= 1e-13) return;
    }
    throw compute_error("chain accumulator: singular value extraction did not converge");
  }

  int n_;
  Matrix q_, u_;
  std::vector<double> s_;
};

}  // namespace detail

// Generic driver: factor_at(trial, step) supplies the step-th left factor of
// trial's product. Returns trials rows of log sigma_k, k = 1..n descending.
inline std::vector<std::vector<double>> simulate_chain_with(
    const ChainConfig& cfg, const std::function<Matrix(int, int)>& factor_at) {
  validate_chain_config(cfg);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, [&](int trial) {
    detail::QduAccumulator acc(cfg.n);
    for (int step = 0; step < cfg.depth; ++step) acc.multiply_left(factor_at(trial, step));
    out[static_cast<std::size_t>(trial)] = acc.log_singular_values();
  });
  return out;
}

// Standard-Gaussian factors from per-trial seed streams.
inline std::vector<std::vector<double>> simulate_chain(const ChainConfig& cfg) {
  validate_chain_config(cfg);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, [&](int trial) {
    GaussianStream g(substream(cfg.seed, static_cast<std::uint64_t>(trial)));
    detail::QduAccumulator acc(cfg.n);
    Matrix factor(cfg.n, cfg.n);
    for (int step = 0; step < cfg.depth; ++step) {
      for (double& v : factor.data()) v = g.next();
      acc.multiply_left(factor);
    }
    out[static_cast<std::size_t>(trial)] = acc.log_singular_values();
  });
  return out;
}

struct LyapunovEstimate {
  int n = 0;
  int depth = 0;
  int trials = 0;
  std::vector<double> lambda_hat;  // mean over trials of (1/L) log sigma_k
  std::vector<double> stderr_k;    // sample stderr of that mean
  std::vector<double> theory;      // (1/2)(ln 2 + psi((n-k+1)/2))
};

inline LyapunovEstimate estimate_spectrum(const ChainConfig& cfg) {
  const std::vector<std::vector<double>> logs = simulate_chain(cfg);
  LyapunovEstimate est;
  est.n = cfg.n;
  est.depth = cfg.depth;
  est.trials = cfg.trials;
  est.lambda_hat.assign(static_cast<std::size_t>(cfg.n), 0.0);
  est.stderr_k.assign(static_cast<std::size_t>(cfg.n), 0.0);
  est.theory = theory_spectrum(cfg.n);
  for (int k = 0; k < cfg.n; ++k) {
    double mean = 0.0;
    for (const auto& row : logs) mean += row[static_cast<std::size_t>(k)] / cfg.depth;
    mean /= cfg.trials;
    double var = 0.0;
    for (const auto& row : logs) {
      const double d = row[static_cast<std::size_t>(k)] / cfg.depth - mean;
      var += d * d;
    }
    est.lambda_hat[static_cast<std::size_t>(k)] = mean;
    est.stderr_k[static_cast<std::size_t>(k)] =
        cfg.trials > 1 ? std::sqrt(var / (cfg.trials - 1) / cfg.trials) : 0.0;
  }
  return est;
}

// Smallest depth L at which the second-index contraction predicts numerical
// rank 1: rate^L < n * eps, with rate the theoretical sigma_2/sigma_1
// per-step ratio (or a measured one). The n * eps product is the rank-1
// threshold seen by an n-wide chain whose tolerance resolves n comparable
// directions.
inline int collapse_depth_at_rate(int n, double eps, double rate) {
  if (n < 1) throw input_error("collapse_depth: n must be positive");
  if (!(eps > 0.0) || !(eps < 1.0)) throw input_error("collapse_depth: eps must be in (0,1)");
  if (!(rate < 1.0)) throw input_error("collapse_depth: non-contracting rate (must be < 1)");
  if (!(rate > 0.0)) throw input_error("collapse_depth: rate must be positive");
  const double target = eps * n;
  double acc = rate;
  int depth = 1;
  while (acc >= target) {
    acc *= rate;
    ++depth;
    if (depth > 100000000) throw compute_error("collapse_depth: no collapse within 1e8 layers");
  }
  return depth;
}

inline int collapse_depth(int n, double eps) {
  return collapse_depth_at_rate(n, eps, theory_ratio_rate(n, 2));
}

// Fraction of simulated chains whose numerical rank at relative tolerance
// eps equals 1, evaluated on the exact per-trial log spectra.
inline double rank_one_fraction(const ChainConfig& cfg, double eps) {
  if (!(eps > 0.0)) throw input_error("rank_one_fraction: eps must be positive");
  const std::vector<std::vector<double>> logs = simulate_chain(cfg);
  const double log_eps = std::log(eps);
  int hits = 0;
  for (const auto& row : logs) {
    int rank = 0;
    for (double v : row)
      if (v >= row.front() + log_eps) ++rank;
    if (rank == 1) ++hits;
  }
  return static_cast<double>(hits) / cfg.trials;
}

}  // namespace rankscope
