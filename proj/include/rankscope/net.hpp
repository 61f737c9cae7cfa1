// Miniature layered-network engine: dense, activation, layer-norm and
// residual layers with exact analytic Jacobians, chained network Jacobians
// along the forward trajectory, a zero-padding column probe, and contiguous
// skip-connection flattening.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"
#include "rankscope/rng.hpp"

namespace rankscope {

enum class ActKind { ReLU, GELU, SiLU };

struct GaussianInit {
  std::uint64_t seed = 0;
  double std = 1.0;
};
struct ExplicitInit {
  Matrix weight;
};
using WeightInit = std::variant<GaussianInit, ExplicitInit>;

struct LayerSpec;

struct DenseSpec {
  int out_dim = 0;
  WeightInit init;
  std::optional<std::vector<double>> bias;
};
struct ActivationSpec {
  ActKind kind = ActKind::ReLU;
};
struct LayerNormAffine {
  std::vector<double> scale;
  std::vector<double> shift;
};
struct LayerNormSpec {
  std::optional<LayerNormAffine> affine;
};
struct ResidualSpec {
  std::vector<LayerSpec> body;
};

struct LayerSpec {
  std::variant<DenseSpec, ActivationSpec, LayerNormSpec, ResidualSpec> node;
};

inline LayerSpec dense_gaussian(int out_dim, std::uint64_t seed, double std,
                                std::optional<std::vector<double>> bias = std::nullopt) {
  return LayerSpec{DenseSpec{out_dim, GaussianInit{seed, std}, std::move(bias)}};
}
inline LayerSpec dense_explicit(Matrix weight,
                                std::optional<std::vector<double>> bias = std::nullopt) {
  DenseSpec d;
  d.out_dim = weight.rows();
  d.init = ExplicitInit{std::move(weight)};
  d.bias = std::move(bias);
  return LayerSpec{std::move(d)};
}
inline LayerSpec activation(ActKind kind) { return LayerSpec{ActivationSpec{kind}}; }
inline LayerSpec layer_norm(std::optional<LayerNormAffine> affine = std::nullopt) {
  return LayerSpec{LayerNormSpec{std::move(affine)}};
}
inline LayerSpec residual(std::vector<LayerSpec> body) {
  return LayerSpec{ResidualSpec{std::move(body)}};
}

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  std::uint64_t master_seed = 0;
};

// Strictly increasing input-coordinate indices for the zero-padding probe.
struct JacobianProbe {
  std::vector<int> column_indices;
};

inline void validate_probe(const JacobianProbe& probe, int input_dim) {
  if (probe.column_indices.empty()) throw input_error("probe: at least one column index required");
  int prev = -1;
  for (int j : probe.column_indices) {
    if (j <= prev) throw input_error("probe: column indices must be strictly increasing");
    if (j < 0 || j >= input_dim) throw input_error("probe: column index out of range");
    prev = j;
  }
}

namespace detail {

inline double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
}
inline double gelu_deriv(double x) {
  const double phi_cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
  const double phi_pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
  return phi_cdf + x * phi_pdf;
}
inline double silu_value(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return x * s;
}
inline double silu_deriv(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

struct LayerNormStats {
  double sigma;                // biased standard deviation, divide-by-n
  std::vector<double> normed;  // (x - mean) / sigma
};

inline LayerNormStats layer_norm_stats(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  if (var < 1e-24)
    throw compute_error("layer_norm: degenerate input (variance below 1e-24)");
  LayerNormStats st;
  st.sigma = std::sqrt(var);
  st.normed.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) st.normed[i] = (x[i] - mean) / st.sigma;
  return st;
}

}  // namespace detail

// A network with all Gaussian weights realized. Weight streams are derived
// from (master_seed, traversal index, the init's own seed), where the
// traversal index is the layer's position in a pre-order walk that descends
// into residual bodies and counts only primitive layers (dense, activation,
// layer_norm). Residual wrappers consume no index, so regrouping a chain
// into residual blocks never changes which weights a dense layer draws.
class Network {
 public:
  struct Realized {
    const LayerSpec* spec;
    Matrix weight;               // dense only
    int in_dim = 0, out_dim = 0;
    std::vector<Realized> body;  // residual only
  };

  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.input_dim <= 0) throw input_error("network: input_dim must be positive");
    int counter = 0;
    int width = spec_.input_dim;
    layers_.reserve(spec_.layers.size());
    for (const LayerSpec& l : spec_.layers) {
      layers_.push_back(realize(l, width, counter));
      width = layers_.back().out_dim;
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.input_dim; }
  int depth() const { return static_cast<int>(layers_.size()); }
  int output_dim(int k) const {
    return k == 0 ? spec_.input_dim : layers_[static_cast<std::size_t>(k - 1)].out_dim;
  }

  // F_1(x), ..., F_L(x).
  std::vector<std::vector<double>> evaluate(const std::vector<double>& x) const {
    check_input(x);
    std::vector<std::vector<double>> features;
    features.reserve(layers_.size());
    std::vector<double> h = x;
    for (const Realized& l : layers_) {
      h = forward(l, h);
      features.push_back(h);
    }
    return features;
  }

  std::vector<double> evaluate_at_depth(const std::vector<double>& x, int k) const {
    check_depth(k);
    check_input(x);
    std::vector<double> h = x;
    for (int i = 0; i < k; ++i) h = forward(layers_[static_cast<std::size_t>(i)], h);
    return h;
  }

  // One top-level layer applied to a vector already at its input width.
  std::vector<double> forward_layer(int layer_index, const std::vector<double>& h) const {
    check_depth(layer_index + 1);
    const Realized& l = layers_[static_cast<std::size_t>(layer_index)];
    if (static_cast<int>(h.size()) != l.in_dim)
      throw input_error("forward_layer: input width mismatch");
    return forward(l, h);
  }

  // d F_k / d x restricted to the probe columns; probe = all columns gives
  // the full Jacobian. Cost scales with the number of probed columns: the
  // seed matrix of selected identity columns is pushed through per-layer
  // Jacobian-times-matrix products, no full Jacobian is ever formed for
  // activation or normalization layers.
  Matrix probe_jacobian(const std::vector<double>& x, const JacobianProbe& probe, int k) const {
    check_depth(k);
    validate_probe(probe, spec_.input_dim);
    check_input(x);
    const int kk = static_cast<int>(probe.column_indices.size());
    Matrix m(spec_.input_dim, kk);
    for (int j = 0; j < kk; ++j) m(probe.column_indices[static_cast<std::size_t>(j)], j) = 1.0;
    std::vector<double> h = x;
    for (int i = 0; i < k; ++i) {
      const Realized& l = layers_[static_cast<std::size_t>(i)];
      m = apply_jacobian(l, h, m);
      h = forward(l, h);
    }
    return m;
  }

  Matrix network_jacobian(const std::vector<double>& x, int k) const {
    JacobianProbe all;
    all.column_indices.resize(static_cast<std::size_t>(spec_.input_dim));
    for (int j = 0; j < spec_.input_dim; ++j) all.column_indices[static_cast<std::size_t>(j)] = j;
    return probe_jacobian(x, all, k);
  }

  // Probed Jacobians at every depth 1..L from a single forward pass.
  std::vector<Matrix> probe_jacobian_trajectory(const std::vector<double>& x,
                                                const JacobianProbe& probe) const {
    validate_probe(probe, spec_.input_dim);
    check_input(x);
    const int kk = static_cast<int>(probe.column_indices.size());
    Matrix m(spec_.input_dim, kk);
    for (int j = 0; j < kk; ++j) m(probe.column_indices[static_cast<std::size_t>(j)], j) = 1.0;
    std::vector<Matrix> out;
    out.reserve(layers_.size());
    std::vector<double> h = x;
    for (const Realized& l : layers_) {
      m = apply_jacobian(l, h, m);
      h = forward(l, h);
      out.push_back(m);
    }
    return out;
  }

  // Exact analytic Jacobian of a single top-level layer at its own input.
  Matrix layer_jacobian(int layer_index, const std::vector<double>& x_at_layer_input) const {
    check_depth(layer_index + 1);
    const Realized& l = layers_[static_cast<std::size_t>(layer_index)];
    if (static_cast<int>(x_at_layer_input.size()) != l.in_dim)
      throw input_error("layer_jacobian: input width mismatch");
    Matrix id = identity(l.in_dim);
    return apply_jacobian(l, x_at_layer_input, id);
  }

 private:
  Realized realize(const LayerSpec& l, int in_width, int& counter) const;

  void check_input(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != spec_.input_dim)
      throw input_error("network: input width mismatch");
    for (double v : x)
      if (!std::isfinite(v)) throw input_error("network: non-finite input");
  }
  void check_depth(int k) const {
    if (k < 1 || k > depth()) throw input_error("network: depth out of range");
  }

  static std::vector<double> forward(const Realized& l, const std::vector<double>& x);
  static Matrix apply_jacobian(const Realized& l, const std::vector<double>& x, const Matrix& m);

  NetworkSpec spec_;
  std::vector<Realized> layers_;
};

inline Network::Realized Network::realize(const LayerSpec& l, int in_width, int& counter) const {
  Realized r;
  r.spec = &l;
  r.in_dim = in_width;
  if (const auto* d = std::get_if<DenseSpec>(&l.node)) {
    const int my_index = counter++;
    if (d->out_dim <= 0) throw input_error("dense: out_dim must be positive");
    r.out_dim = d->out_dim;
    if (const auto* g = std::get_if<GaussianInit>(&d->init)) {
      GaussianStream gs(substream(substream(spec_.master_seed, static_cast<std::uint64_t>(my_index)), g->seed));
      r.weight = Matrix(d->out_dim, in_width);
      for (double& v : r.weight.data()) v = gs.next() * g->std;
    } else {
      const Matrix& w = std::get<ExplicitInit>(d->init).weight;
      if (w.rows() != d->out_dim || w.cols() != in_width)
        throw input_error("dense: explicit weight shape inconsistent with chain position");
      w.require_finite("dense weight");
      r.weight = w;
    }
    if (d->bias && static_cast<int>(d->bias->size()) != d->out_dim)
      throw input_error("dense: bias length mismatch");
  } else if (std::holds_alternative<ActivationSpec>(l.node)) {
    counter++;
    r.out_dim = in_width;
  } else if (const auto* ln = std::get_if<LayerNormSpec>(&l.node)) {
    counter++;
    r.out_dim = in_width;
    if (ln->affine && (static_cast<int>(ln->affine->scale.size()) != in_width ||
                       static_cast<int>(ln->affine->shift.size()) != in_width))
      throw input_error("layer_norm: affine vector length mismatch");
  } else {
    const auto& res = std::get<ResidualSpec>(l.node);
    int w = in_width;
    for (const LayerSpec& b : res.body) {
      r.body.push_back(realize(b, w, counter));
      w = r.body.back().out_dim;
    }
    if (w != in_width)
      throw input_error("residual: body must map R^n to R^n (width " + std::to_string(in_width) +
                        " vs " + std::to_string(w) + ")");
    r.out_dim = in_width;
  }
  return r;
}

inline std::vector<double> Network::forward(const Realized& l, const std::vector<double>& x) {
  if (const auto* d = std::get_if<DenseSpec>(&l.spec->node)) {
    std::vector<double> y = multiply_vec(l.weight, x);
    if (d->bias)
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += (*d->bias)[i];
    return y;
  }
  if (const auto* a = std::get_if<ActivationSpec>(&l.spec->node)) {
    std::vector<double> y = x;
    switch (a->kind) {
      case ActKind::ReLU:
        for (double& v : y) v = v > 0.0 ? v : 0.0;
        break;
      case ActKind::GELU:
        for (double& v : y) v = detail::gelu_value(v);
        break;
      case ActKind::SiLU:
        for (double& v : y) v = detail::silu_value(v);
        break;
    }
    return y;
  }
  if (const auto* ln = std::get_if<LayerNormSpec>(&l.spec->node)) {
    detail::LayerNormStats st = detail::layer_norm_stats(x);
    std::vector<double> y = st.normed;
    if (ln->affine)
      for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = ln->affine->scale[i] * y[i] + ln->affine->shift[i];
    return y;
  }
  std::vector<double> h = x;
  for (const Realized& b : l.body) h = forward(b, h);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
  return h;
}

inline Matrix Network::apply_jacobian(const Realized& l, const std::vector<double>& x,
                                      const Matrix& m) {
  if (std::holds_alternative<DenseSpec>(l.spec->node)) return multiply(l.weight, m);
  if (const auto* a = std::get_if<ActivationSpec>(&l.spec->node)) {
    Matrix out = m;
    for (int i = 0; i < out.rows(); ++i) {
      double dv = 0.0;
      const double xi = x[static_cast<std::size_t>(i)];
      switch (a->kind) {
        case ActKind::ReLU:
          dv = xi > 0.0 ? 1.0 : 0.0;  // derivative at exactly 0 is 0
          break;
        case ActKind::GELU:
          dv = detail::gelu_deriv(xi);
          break;
        case ActKind::SiLU:
          dv = detail::silu_deriv(xi);
          break;
      }
      for (int j = 0; j < out.cols(); ++j) out(i, j) *= dv;
    }
    return out;
  }
  if (const auto* ln = std::get_if<LayerNormSpec>(&l.spec->node)) {
    // J = (1/sigma) (I - (1/n) 1 1^T - (1/n) yhat yhat^T), with yhat the
    // normalized vector. Both subtracted terms are orthogonal projectors
    // (1^T yhat = 0, |yhat|^2 = n), so J has exactly the two kernel
    // directions 1 and x - mean(x).
    detail::LayerNormStats st = detail::layer_norm_stats(x);
    const int n = static_cast<int>(x.size());
    Matrix out(n, m.cols());
    for (int j = 0; j < m.cols(); ++j) {
      double colsum = 0.0, ydot = 0.0;
      for (int i = 0; i < n; ++i) {
        colsum += m(i, j);
        ydot += st.normed[static_cast<std::size_t>(i)] * m(i, j);
      }
      colsum /= n;
      ydot /= n;
      for (int i = 0; i < n; ++i)
        out(i, j) = (m(i, j) - colsum - st.normed[static_cast<std::size_t>(i)] * ydot) / st.sigma;
    }
    if (ln->affine)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < out.cols(); ++j) out(i, j) *= ln->affine->scale[static_cast<std::size_t>(i)];
    return out;
  }
  // Residual: J = I + J_body, applied as m + J_body m along the body
  // trajectory.
  Matrix t = m;
  std::vector<double> h = x;
  for (const Realized& b : l.body) {
    t = apply_jacobian(b, h, t);
    h = forward(b, h);
  }
  return add(m, t);
}

// ---- Spec-level free functions -------------------------------------------

inline std::vector<std::vector<double>> evaluate(const NetworkSpec& net,
                                                 const std::vector<double>& x) {
  return Network(net).evaluate(x);
}

inline Matrix network_jacobian(const NetworkSpec& net, const std::vector<double>& x, int k) {
  return Network(net).network_jacobian(x, k);
}

inline Matrix padded_probe_jacobian(const NetworkSpec& net, const std::vector<double>& x,
                                    const JacobianProbe& probe, int k) {
  return Network(net).probe_jacobian(x, probe, k);
}

// Jacobian of one standalone layer at input x (the layer is realized inside
// a single-layer network with the given master seed for Gaussian weights).
inline Matrix layer_jacobian(const LayerSpec& layer, const std::vector<double>& x,
                             std::uint64_t master_seed = 0) {
  NetworkSpec s;
  s.input_dim = static_cast<int>(x.size());
  s.layers = {layer};
  s.master_seed = master_seed;
  return Network(s).layer_jacobian(0, x);
}

// ---- Skip-connection flattening ------------------------------------------

// A plain chain of layers plus skip connections: skip {from = s, to = i}
// means x_i = x_s + (f_i o ... o f_{s+1})(x_s), i.e. the sub-chain spanning
// layers s+1..i (1-based) is bridged by an identity path merged at i.
// The chain's reported depth counts each skip's merge-add as one step of the
// composition, so depth = #layers + #skips.
struct SkipConnection {
  int from = 0;  // 0-based feature index: 0 is the input, k is after layer k
  int to = 0;    // feature index at the merge, to > from
};

struct SkipChainSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  std::vector<SkipConnection> skips;
  std::uint64_t master_seed = 0;
};

namespace detail {
// Activation, layer_norm and residual all preserve width.
inline int layer_out_width(const LayerSpec& l, int in_width) {
  if (const auto* d = std::get_if<DenseSpec>(&l.node)) return d->out_dim;
  return in_width;
}
}  // namespace detail

inline int reported_depth(const SkipChainSpec& s) {
  return static_cast<int>(s.layers.size() + s.skips.size());
}

// Collapse every skipped span into a single Residual layer whose body is the
// spanned sub-chain. The result evaluates pointwise identically and its
// depth is smaller by exactly (to - from) per skip.
inline NetworkSpec flatten_skip(const SkipChainSpec& chain) {
  const int L = static_cast<int>(chain.layers.size());
  std::vector<SkipConnection> skips = chain.skips;
  std::sort(skips.begin(), skips.end(),
            [](const SkipConnection& a, const SkipConnection& b) { return a.from < b.from; });
  int prev_end = 0;
  for (const SkipConnection& sc : skips) {
    if (sc.from < 0 || sc.to > L || sc.from >= sc.to)
      throw input_error("flatten_skip: skip endpoints out of range");
    if (sc.from < prev_end) throw input_error("flatten_skip: overlapping skips");
    prev_end = sc.to;
  }
  // Width check: the widths at `from` and `to` must agree for the identity
  // branch to be addable.
  std::vector<int> widths(static_cast<std::size_t>(L) + 1);
  widths[0] = chain.input_dim;
  for (int k = 0; k < L; ++k)
    widths[static_cast<std::size_t>(k) + 1] =
        detail::layer_out_width(chain.layers[static_cast<std::size_t>(k)], widths[static_cast<std::size_t>(k)]);
  for (const SkipConnection& sc : skips)
    if (widths[static_cast<std::size_t>(sc.from)] != widths[static_cast<std::size_t>(sc.to)])
      throw input_error("flatten_skip: width mismatch across skip");

  NetworkSpec out;
  out.input_dim = chain.input_dim;
  out.master_seed = chain.master_seed;
  std::size_t next_skip = 0;
  int k = 0;
  while (k < L) {
    if (next_skip < skips.size() && skips[next_skip].from == k) {
      const SkipConnection& sc = skips[next_skip];
      std::vector<LayerSpec> body(chain.layers.begin() + sc.from, chain.layers.begin() + sc.to);
      out.layers.push_back(residual(std::move(body)));
      k = sc.to;
      ++next_skip;
    } else {
      out.layers.push_back(chain.layers[static_cast<std::size_t>(k)]);
      ++k;
    }
  }
  return out;
}

// Direct simulation of the chain with its skips threaded through the merge
// points, independent of any residual regrouping. Returns x_0 .. x_L.
inline std::vector<std::vector<double>> evaluate_skip_chain(const SkipChainSpec& chain,
                                                            const std::vector<double>& x) {
  NetworkSpec plain;
  plain.input_dim = chain.input_dim;
  plain.layers = chain.layers;
  plain.master_seed = chain.master_seed;
  Network nw(plain);
  const int L = nw.depth();
  std::vector<std::vector<double>> feats;
  feats.reserve(static_cast<std::size_t>(L) + 1);
  feats.push_back(x);
  for (int k = 1; k <= L; ++k) {
    std::vector<double> h = nw.forward_layer(k - 1, feats.back());
    for (const SkipConnection& sc : chain.skips) {
      if (sc.to != k) continue;
      const std::vector<double>& src = feats[static_cast<std::size_t>(sc.from)];
      if (src.size() != h.size()) throw input_error("skip chain: width mismatch across skip");
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += src[i];
    }
    feats.push_back(std::move(h));
  }
  return feats;
}

}  // namespace rankscope
