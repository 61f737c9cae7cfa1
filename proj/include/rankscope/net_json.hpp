// JSON round-trip for NetworkSpec. Document shape:
//   {"input_dim": n, "master_seed": s, "layers": [ <layer>, ... ]}
// with layers tagged by "kind":
//   {"kind": "dense", "out_dim": m, "init": {"gaussian": {"seed": u, "std": d}}
//                                 | {"explicit": [[row], ...]}, "bias": [..]?}
//   {"kind": "activation", "fn": "relu" | "gelu" | "silu"}
//   {"kind": "layer_norm", "affine": {"scale": [..], "shift": [..]}?}
//   {"kind": "residual", "body": [ <layer>, ... ]}
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rankscope/common.hpp"
#include "rankscope/net.hpp"

namespace rankscope {

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw input_error("network json: explicit weight must be a nested array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw input_error("network json: ragged explicit weight");
    for (int c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline std::string act_name(ActKind k) {
  switch (k) {
    case ActKind::ReLU: return "relu";
    case ActKind::GELU: return "gelu";
    case ActKind::SiLU: return "silu";
  }
  throw input_error("network json: unknown activation");
}

inline ActKind act_from_name(const std::string& s) {
  if (s == "relu") return ActKind::ReLU;
  if (s == "gelu") return ActKind::GELU;
  if (s == "silu") return ActKind::SiLU;
  throw input_error("network json: unknown activation '" + s + "'");
}

inline nlohmann::json layer_to_json(const LayerSpec& l);

inline nlohmann::json layers_to_json(const std::vector<LayerSpec>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const LayerSpec& l : layers) arr.push_back(layer_to_json(l));
  return arr;
}

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j;
  if (const auto* d = std::get_if<DenseSpec>(&l.node)) {
    j["kind"] = "dense";
    j["out_dim"] = d->out_dim;
    if (const auto* g = std::get_if<GaussianInit>(&d->init))
      j["init"] = {{"gaussian", {{"seed", g->seed}, {"std", g->std}}}};
    else
      j["init"] = {{"explicit", matrix_to_json(std::get<ExplicitInit>(d->init).weight)}};
    if (d->bias) j["bias"] = *d->bias;
  } else if (const auto* a = std::get_if<ActivationSpec>(&l.node)) {
    j["kind"] = "activation";
    j["fn"] = act_name(a->kind);
  } else if (const auto* ln = std::get_if<LayerNormSpec>(&l.node)) {
    j["kind"] = "layer_norm";
    if (ln->affine) j["affine"] = {{"scale", ln->affine->scale}, {"shift", ln->affine->shift}};
  } else {
    const auto& r = std::get<ResidualSpec>(l.node);
    j["kind"] = "residual";
    j["body"] = layers_to_json(r.body);
  }
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j);

inline std::vector<LayerSpec> layers_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw input_error("network json: 'layers' must be an array");
  std::vector<LayerSpec> out;
  out.reserve(arr.size());
  for (const auto& l : arr) out.push_back(layer_from_json(l));
  return out;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw input_error("network json: each layer needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dense") {
    DenseSpec d;
    d.out_dim = j.at("out_dim").get<int>();
    const auto& init = j.at("init");
    if (init.contains("gaussian")) {
      const auto& g = init.at("gaussian");
      d.init = GaussianInit{g.at("seed").get<std::uint64_t>(),
                            g.contains("std") ? g.at("std").get<double>() : 1.0};
    } else if (init.contains("explicit")) {
      d.init = ExplicitInit{matrix_from_json(init.at("explicit"))};
    } else {
      throw input_error("network json: dense init must be 'gaussian' or 'explicit'");
    }
    if (j.contains("bias")) d.bias = j.at("bias").get<std::vector<double>>();
    return LayerSpec{std::move(d)};
  }
  if (kind == "activation") return activation(act_from_name(j.at("fn").get<std::string>()));
  if (kind == "layer_norm") {
    if (!j.contains("affine")) return layer_norm();
    const auto& a = j.at("affine");
    return layer_norm(LayerNormAffine{a.at("scale").get<std::vector<double>>(),
                                      a.at("shift").get<std::vector<double>>()});
  }
  if (kind == "residual") return residual(layers_from_json(j.at("body")));
  throw input_error("network json: unknown layer kind '" + kind + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const NetworkSpec& net) {
  nlohmann::json j;
  j["input_dim"] = net.input_dim;
  j["master_seed"] = net.master_seed;
  j["layers"] = detail::layers_to_json(net.layers);
  return j;
}

inline NetworkSpec network_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw input_error("network json: document must be an object");
    NetworkSpec net;
    net.input_dim = j.at("input_dim").get<int>();
    net.master_seed = j.contains("master_seed") ? j.at("master_seed").get<std::uint64_t>() : 0;
    net.layers = detail::layers_from_json(j.at("layers"));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("network json: ") + e.what());
  }
}

inline NetworkSpec parse_network(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("network json: parse failure: ") + e.what());
  }
  return network_from_json(j);
}

}  // namespace rankscope
