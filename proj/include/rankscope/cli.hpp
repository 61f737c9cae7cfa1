// Command-line driver: one subcommand per diagnostic, CSV/JSON outputs at 17
// significant digits, and a JSON run manifest next to every output file so
// any run can be reproduced byte-for-byte from its manifest.
#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankscope/common.hpp"
#include "rankscope/deficit.hpp"
#include "rankscope/diagnostics.hpp"
#include "rankscope/io.hpp"
#include "rankscope/lyapunov.hpp"
#include "rankscope/net.hpp"
#include "rankscope/net_json.hpp"
#include "rankscope/parallel.hpp"
#include "rankscope/spectral.hpp"

namespace rankscope::cli {

// ---- Manifests ---------------------------------------------------------------

// Collects the resolved parameter set of a run. Values are stored as the
// exact strings a re-run would pass on the command line.
class ManifestBuilder {
 public:
  ManifestBuilder(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void add(const std::string& flag, const std::string& value) { params_[flag] = value; }
  void add(const std::string& flag, int value) { params_[flag] = std::to_string(value); }
  void add(const std::string& flag, std::uint64_t value) { params_[flag] = std::to_string(value); }
  void add(const std::string& flag, double value) { params_[flag] = format_double(value); }
  void add_list(const std::string& flag, const std::vector<double>& values) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : values) arr.push_back(format_double(v));
    params_[flag] = std::move(arr);
  }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  nlohmann::json build(const std::string& out_path) const {
    nlohmann::json m;
    m["subcommand"] = subcommand_;
    m["version"] = kVersion;
    if (seed_)
      m["seed"] = *seed_;
    else
      m["seed"] = nullptr;
    m["parameters"] = params_;
    m["outputs"] = nlohmann::json::array({out_path});
    return m;
  }

  void write(const std::string& out_path) const {
    write_text_file(out_path + ".manifest.json", build(out_path).dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  std::optional<std::uint64_t> seed_;
  nlohmann::json params_ = nlohmann::json::object();
};

// Rebuilds the argument vector of the run a manifest describes. The
// parameter object maps long flag names to string values (or arrays of
// strings for repeatable flags); key order does not matter to the parser.
inline std::vector<std::string> manifest_to_argv(const nlohmann::json& manifest) {
  std::vector<std::string> argv;
  argv.push_back(manifest.at("subcommand").get<std::string>());
  for (const auto& [key, value] : manifest.at("parameters").items()) {
    if (value.is_array()) {
      for (const auto& v : value) {
        argv.push_back("--" + key);
        argv.push_back(v.get<std::string>());
      }
    } else if (value.is_boolean()) {
      if (value.get<bool>()) argv.push_back("--" + key);
    } else {
      argv.push_back("--" + key);
      argv.push_back(value.get<std::string>());
    }
  }
  for (const auto& out : manifest.at("outputs")) {
    argv.push_back("--out");
    argv.push_back(out.get<std::string>());
  }
  return argv;
}

// ---- Shared flag groups --------------------------------------------------------

namespace detail {

struct TolFlags {
  std::string mode = "float32";
  double eps = 0.0;
  int count = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--eps-mode", mode, "tolerance mode: float32 or relative")
        ->check(CLI::IsMember({"float32", "relative"}));
    cmd->add_option("--eps", eps, "relative tolerance (required with --eps-mode relative)");
    cmd->add_option("--count", count, "float32 convention multiplier N (epsilon = 1.19e-7 N)");
  }

  ToleranceSpec resolve(int default_count, ManifestBuilder& mf) const {
    if (mode == "relative") {
      if (!(eps > 0.0)) throw input_error("--eps-mode relative requires a positive --eps");
      mf.add("eps-mode", std::string("relative"));
      mf.add("eps", eps);
      return ToleranceSpec::relative(eps);
    }
    const int n = count > 0 ? count : default_count;
    mf.add("eps-mode", std::string("float32"));
    mf.add("count", n);
    return ToleranceSpec::float32(n);
  }
};

inline std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const char* what) {
  if (!seed)
    throw input_error(std::string(what) + " samples random data; pass --seed for a reproducible run");
  return *seed;
}

inline JacobianProbe full_probe(int dim) {
  JacobianProbe p;
  p.column_indices.resize(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) p.column_indices[static_cast<std::size_t>(j)] = j;
  return p;
}

inline int max_width(const Network& nw) {
  int w = nw.input_dim();
  for (int k = 1; k <= nw.depth(); ++k) w = std::max(w, nw.output_dim(k));
  return w;
}

inline void write_json_out(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace detail

// ---- Subcommand handlers --------------------------------------------------------

namespace detail {

struct RankArgs {
  std::string matrix, out;
  TolFlags tol;
};

inline void run_rank(const RankArgs& a) {
  const Matrix m = read_matrix_csv(a.matrix);
  ManifestBuilder mf("rank");
  mf.add("matrix", a.matrix);
  const ToleranceSpec tol = a.tol.resolve(std::max(m.rows(), m.cols()), mf);
  const SpectralSummary s = spectral_summary(m, tol);
  std::cout << s.numerical_rank << "\n";
  if (!a.out.empty()) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["epsilon"] = tol.epsilon();
    j["spectral_norm"] = s.spectral_norm;
    j["rank"] = s.numerical_rank;
    write_json_out(a.out, j);
    mf.write(a.out);
  }
}

struct SweepArgs {
  std::string net, input, columns, out;
  int probe_size = 0;
  std::optional<std::uint64_t> seed;
  TolFlags tol;
};

inline void run_sweep(const SweepArgs& a) {
  const NetworkSpec spec = parse_network(read_text_file(a.net));
  Network nw(spec);
  ManifestBuilder mf("sweep");
  mf.add("net", a.net);

  std::vector<double> x;
  if (!a.input.empty()) {
    x = read_vector_csv(a.input);
    mf.add("input", a.input);
    if (a.seed) {
      mf.set_seed(*a.seed);
      mf.add("seed", *a.seed);
    }
  } else {
    const std::uint64_t seed = require_seed(a.seed, "sweep without --input");
    GaussianStream g(substream(seed, 0xd1));
    x.resize(static_cast<std::size_t>(nw.input_dim()));
    for (double& v : x) v = g.next();
    mf.set_seed(seed);
    mf.add("seed", seed);
  }

  JacobianProbe probe;
  if (!a.columns.empty() && a.probe_size > 0)
    throw input_error("sweep: pass --columns or --probe-size, not both");
  if (!a.columns.empty()) {
    for (const std::string& tok : split_csv_line(a.columns))
      probe.column_indices.push_back(static_cast<int>(parse_double(tok, "--columns")));
    mf.add("columns", a.columns);
  } else if (a.probe_size > 0) {
    probe = full_probe(std::min(a.probe_size, nw.input_dim()));
    mf.add("probe-size", a.probe_size);
  } else {
    probe = full_probe(nw.input_dim());
  }

  const ToleranceSpec tol = a.tol.resolve(max_width(nw), mf);
  const RankSweepResult res = partial_rank_sweep(spec, x, probe, tol);
  for (const RankSweepRow& r : res.rows)
    std::cout << "depth " << r.depth << ": partial rank " << r.partial_rank << " of K=" << r.probe_size
              << "\n";
  if (!a.out.empty()) {
    std::string csv = "depth,partial_rank,K,epsilon\n";
    for (const RankSweepRow& r : res.rows)
      csv += std::to_string(r.depth) + "," + std::to_string(r.partial_rank) + "," +
             std::to_string(r.probe_size) + "," + format_double(r.epsilon) + "\n";
    write_text_file(a.out, csv);
    mf.write(a.out);
  }
}

struct ChainArgs {
  int width = 0, depth = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  TolFlags tol;
};

inline void run_chain(const ChainArgs& a) {
  const std::uint64_t seed = require_seed(a.seed, "chain");
  ManifestBuilder mf("chain");
  mf.add("width", a.width);
  mf.add("depth", a.depth);
  mf.add("seed", seed);
  mf.set_seed(seed);
  const ToleranceSpec tol = a.tol.resolve(a.width, mf);
  const std::vector<ChainDepthRow> rows = linear_chain_experiment(a.width, a.depth, seed, tol);
  for (const ChainDepthRow& r : rows)
    std::cout << "depth " << r.depth << ": jac rank " << r.jac_rank << ", cov rank " << r.cov_rank
              << "\n";
  if (!a.out.empty()) {
    std::string csv = "depth,jac_rank,cov_rank\n";
    for (const ChainDepthRow& r : rows)
      csv += std::to_string(r.depth) + "," + std::to_string(r.jac_rank) + "," +
             std::to_string(r.cov_rank) + "\n";
    write_text_file(a.out, csv);
    mf.write(a.out);
  }
}

struct LyapArgs {
  int n = 0, depth = 0, trials = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline void run_lyapunov(const LyapArgs& a) {
  const std::uint64_t seed = require_seed(a.seed, "lyapunov");
  ChainConfig cfg{a.n, a.depth, a.trials, seed};
  const LyapunovEstimate est = estimate_spectrum(cfg);
  std::string csv = "k,lambda_hat,stderr,theory,abs_error,z_score\n";
  for (int k = 0; k < est.n; ++k) {
    const double diff = est.lambda_hat[static_cast<std::size_t>(k)] -
                        est.theory[static_cast<std::size_t>(k)];
    const double se = est.stderr_k[static_cast<std::size_t>(k)];
    const double z = se > 0.0 ? diff / se
                              : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    csv += std::to_string(k + 1) + "," + format_double(est.lambda_hat[static_cast<std::size_t>(k)]) +
           "," + format_double(se) + "," + format_double(est.theory[static_cast<std::size_t>(k)]) +
           "," + format_double(std::abs(diff)) + "," + format_double(z) + "\n";
    std::cout << "k=" << k + 1 << " lambda_hat=" << format_double(est.lambda_hat[static_cast<std::size_t>(k)])
              << " theory=" << format_double(est.theory[static_cast<std::size_t>(k)])
              << " z=" << format_double(z) << (std::abs(z) <= 2.0 ? " PASS" : " FAIL") << "\n";
  }
  if (!a.out.empty()) {
    write_text_file(a.out, csv);
    ManifestBuilder mf("lyapunov");
    mf.add("n", a.n);
    mf.add("depth", a.depth);
    mf.add("trials", a.trials);
    mf.add("seed", seed);
    mf.set_seed(seed);
    mf.write(a.out);
  }
}

struct CollapseArgs {
  int n = 0;
  double rate = 0.0;
  int check_trials = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  TolFlags tol;
};

inline void run_collapse(const CollapseArgs& a) {
  ManifestBuilder mf("collapse");
  mf.add("n", a.n);
  const ToleranceSpec tol = a.tol.resolve(a.n, mf);
  const double eps = tol.epsilon();
  const double rate = a.rate > 0.0 ? a.rate : theory_ratio_rate(a.n, 2);
  if (a.rate > 0.0) mf.add("rate", a.rate);
  const int depth = collapse_depth_at_rate(a.n, eps, rate);
  std::cout << "predicted collapse depth: " << depth << " (rate " << format_double(rate) << ", eps "
            << format_double(eps) << ")\n";

  nlohmann::json j;
  j["n"] = a.n;
  j["epsilon"] = eps;
  j["rate"] = rate;
  j["predicted_depth"] = depth;
  if (a.check_trials > 0) {
    const std::uint64_t seed = require_seed(a.seed, "collapse --check-trials");
    mf.add("check-trials", a.check_trials);
    mf.add("seed", seed);
    mf.set_seed(seed);
    const double frac = rank_one_fraction(ChainConfig{a.n, depth, a.check_trials, seed}, eps);
    std::cout << "rank-1 fraction at depth " << depth << ": " << format_double(frac) << " ("
              << a.check_trials << " trials)\n";
    j["check"] = {{"trials", a.check_trials}, {"rank_one_fraction", frac}};
  }
  if (!a.out.empty()) {
    write_json_out(a.out, j);
    mf.write(a.out);
  }
}

struct ClsDimArgs {
  std::string features, labels, head, mode = "relative", out;
  double retention = 0.95;
};

inline void run_clsdim(const ClsDimArgs& a) {
  const Matrix features = read_matrix_csv(a.features);
  const std::vector<double> raw_labels = read_vector_csv(a.labels);
  std::vector<int> labels;
  labels.reserve(raw_labels.size());
  for (double v : raw_labels) {
    const int i = static_cast<int>(v);
    if (v != i) throw input_error("clsdim: labels must be integers");
    labels.push_back(i);
  }
  ClsDimConfig cfg;
  cfg.head = read_matrix_csv(a.head);
  cfg.retention = a.retention;
  if (a.mode == "relative")
    cfg.mode = ClsDimConfig::Mode::RelativeToBaseline;
  else if (a.mode == "absolute")
    cfg.mode = ClsDimConfig::Mode::Absolute;
  else
    throw input_error("clsdim: --mode must be relative or absolute");
  const ClsDimResult res = cls_dim(features, labels, cfg);
  std::cout << "cls_dim: " << res.dim << (res.attained ? "" : " (target never met)") << ", baseline "
            << format_double(res.baseline_accuracy) << ", achieved "
            << format_double(res.achieved_accuracy) << "\n";
  if (!a.out.empty()) {
    nlohmann::json j;
    j["dim"] = res.dim;
    j["attained"] = res.attained;
    j["baseline_accuracy"] = res.baseline_accuracy;
    j["achieved_accuracy"] = res.achieved_accuracy;
    j["retention"] = a.retention;
    j["mode"] = a.mode;
    write_json_out(a.out, j);
    ManifestBuilder mf("clsdim");
    mf.add("features", a.features);
    mf.add("labels", a.labels);
    mf.add("head", a.head);
    mf.add("retention", a.retention);
    mf.add("mode", a.mode);
    mf.write(a.out);
  }
}

struct PertDimArgs {
  std::string net, out;
  int depth = 1, points = 100, samples = 2000;
  double noise_std = 1e-3;
  std::optional<std::uint64_t> seed;
};

inline void run_pertdim(const PertDimArgs& a) {
  const std::uint64_t seed = require_seed(a.seed, "pertdim");
  const NetworkSpec spec = parse_network(read_text_file(a.net));
  Network nw(spec);
  PertDimConfig cfg;
  cfg.noise_std = a.noise_std;
  cfg.samples = a.samples;
  cfg.points = a.points;
  const std::vector<std::vector<double>> points =
      gaussian_points(a.points, nw.input_dim(), substream(seed, 0x505));
  const double dim_here = perturbed_pca_dim(spec, a.depth, points, cfg, substream(seed, 0xd17));
  const double dim_input = perturbed_pca_dim(spec, 0, points, cfg, substream(seed, 0xd17));
  std::cout << "mean dimension at depth " << a.depth << ": " << format_double(dim_here)
            << " (input " << format_double(dim_input) << ", delta "
            << format_double(dim_here - dim_input) << ")\n";
  if (!a.out.empty()) {
    nlohmann::json j;
    j["depth"] = a.depth;
    j["mean_dim"] = dim_here;
    j["input_mean_dim"] = dim_input;
    j["delta_dim"] = dim_here - dim_input;
    j["points"] = a.points;
    j["samples"] = a.samples;
    j["noise_std"] = a.noise_std;
    j["epsilon"] = ToleranceSpec::float32(a.samples).epsilon();
    write_json_out(a.out, j);
    ManifestBuilder mf("pertdim");
    mf.add("net", a.net);
    mf.add("depth", a.depth);
    mf.add("points", a.points);
    mf.add("samples", a.samples);
    mf.add("noise-std", a.noise_std);
    mf.add("seed", seed);
    mf.set_seed(seed);
    mf.write(a.out);
  }
}

struct StructuralArgs {
  std::string component, kind, out;
  int width = 0, batch = 0, out_dim = 0;
  std::optional<std::uint64_t> seed;
  TolFlags tol;
};

inline void run_structural(const StructuralArgs& a) {
  const std::uint64_t seed = require_seed(a.seed, "structural");
  if (a.component.empty() == a.kind.empty())
    throw input_error("structural: pass exactly one of --component or --kind");
  ManifestBuilder mf("structural");
  LayerSpec layer = activation(ActKind::ReLU);
  if (!a.component.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(a.component));
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("component json: ") + e.what());
    }
    layer = rankscope::detail::layer_from_json(j);
    mf.add("component", a.component);
  } else {
    if (a.kind == "relu")
      layer = activation(ActKind::ReLU);
    else if (a.kind == "gelu")
      layer = activation(ActKind::GELU);
    else if (a.kind == "silu")
      layer = activation(ActKind::SiLU);
    else if (a.kind == "layer_norm")
      layer = layer_norm();
    else if (a.kind == "dense") {
      const int od = a.out_dim > 0 ? a.out_dim : a.width;
      layer = dense_gaussian(od, 0, 1.0 / std::sqrt(static_cast<double>(a.width)));
      mf.add("out-dim", od);
    } else {
      throw input_error("structural: --kind must be relu, gelu, silu, layer_norm or dense");
    }
    mf.add("kind", a.kind);
  }
  const int batch = a.batch > 0 ? a.batch : std::max(256, a.width + 56);
  mf.add("width", a.width);
  mf.add("batch", batch);
  mf.add("seed", seed);
  mf.set_seed(seed);
  const ToleranceSpec tol = a.tol.resolve(a.width, mf);
  const StructuralProbeResult res = structural_probe(layer, a.width, batch, seed, tol);
  std::cout << "dim_before=" << res.dim_before << " dim_after=" << res.dim_after
            << " jacobian_rank=" << res.jacobian_rank << "\n";
  if (!a.out.empty()) {
    nlohmann::json j;
    j["dim_before"] = res.dim_before;
    j["dim_after"] = res.dim_after;
    j["jacobian_rank"] = res.jacobian_rank;
    j["width"] = a.width;
    j["batch"] = batch;
    j["epsilon"] = tol.epsilon();
    write_json_out(a.out, j);
    mf.write(a.out);
  }
}

struct DeficitArgs {
  std::string logits, out;
  int target = 0, max_iterations = 10000;
  double eta = 1e-3, tol = 1e-8;
};

inline void run_deficit(const DeficitArgs& a) {
  const LogitsData data = read_logits_csv(a.logits);
  DeficitProblem p;
  p.logits = data.logits;
  p.target = a.target;
  p.eta = a.eta;
  p.max_iterations = a.max_iterations;
  p.tol = a.tol;
  const DeficitSolution sol = solve_deficit(p);
  const DeficitAccuracy acc = deficit_accuracy(data.logits, data.labels, sol);
  std::cout << "support:";
  if (sol.support.empty()) std::cout << " (empty)";
  for (int j : sol.support)
    std::cout << " " << j << "=" << format_double(sol.coefficients[static_cast<std::size_t>(j)]);
  std::cout << "\nsubstituted accuracy " << format_double(acc.substituted) << " vs original "
            << format_double(acc.original) << (sol.converged ? ", converged in " : ", NOT converged after ")
            << sol.iterations << " sweeps\n";
  if (!a.out.empty()) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (int j : sol.support)
      coeffs.push_back(
          {{"index", j}, {"value", sol.coefficients[static_cast<std::size_t>(j)]}});
    nlohmann::json j;
    j["target"] = sol.target;
    j["eta"] = sol.eta;
    j["coefficients"] = coeffs;
    j["substituted_accuracy"] = acc.substituted;
    j["original_accuracy"] = acc.original;
    j["positive_only"] = {{"substituted_accuracy", acc.positive_substituted},
                          {"original_accuracy", acc.positive_original},
                          {"count", acc.positive_count}};
    j["converged"] = sol.converged;
    j["iterations"] = sol.iterations;
    j["objective"] = sol.objective;
    write_json_out(a.out, j);
    ManifestBuilder mf("deficit");
    mf.add("logits", a.logits);
    mf.add("target", a.target);
    mf.add("eta", a.eta);
    mf.add("max-iterations", a.max_iterations);
    mf.add("tol", a.tol);
    mf.write(a.out);
  }
}

struct ProbArgs {
  int rows = 0, cols = 0, trials = 0;
  std::vector<double> eps;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline void run_prob(const ProbArgs& a) {
  const std::uint64_t seed = require_seed(a.seed, "prob");
  std::vector<ProbabilityEstimate> est =
      rank_deficiency_probabilities(a.rows, a.cols, a.eps, a.trials, seed);
  std::string csv = "epsilon,estimate,stderr,trials\n";
  for (const ProbabilityEstimate& e : est) {
    csv += format_double(e.epsilon) + "," + format_double(e.estimate) + "," +
           format_double(e.stderr_est) + "," + std::to_string(e.trials) + "\n";
    std::cout << "eps=" << format_double(e.epsilon) << ": " << format_double(e.estimate) << " +- "
              << format_double(e.stderr_est) << "\n";
  }
  if (!a.out.empty()) {
    write_text_file(a.out, csv);
    ManifestBuilder mf("prob");
    mf.add("rows", a.rows);
    mf.add("cols", a.cols);
    mf.add_list("eps", a.eps);
    mf.add("trials", a.trials);
    mf.add("seed", seed);
    mf.set_seed(seed);
    mf.write(a.out);
  }
}

}  // namespace detail

// ---- Entry point -----------------------------------------------------------------

// args excludes the program name. Returns the process exit code: 0 success,
// 2 input/usage error, 3 degenerate-computation error.
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"rank diagnostics for layered networks and random matrix products"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (default: RANKSCOPE_THREADS or hardware)");

  detail::RankArgs rank_a;
  CLI::App* rank_cmd = app.add_subcommand("rank", "numerical rank of a matrix CSV");
  rank_cmd->add_option("--matrix", rank_a.matrix, "headerless CSV matrix")->required();
  rank_a.tol.attach(rank_cmd);
  rank_cmd->add_option("--out", rank_a.out, "write a JSON summary here");

  detail::SweepArgs sweep_a;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "per-depth partial Jacobian ranks of a network");
  sweep_cmd->add_option("--net", sweep_a.net, "NetworkSpec JSON file")->required();
  sweep_cmd->add_option("--input", sweep_a.input, "input vector CSV (default: seeded Gaussian)");
  sweep_cmd->add_option("--probe-size", sweep_a.probe_size, "probe the first K input coordinates");
  sweep_cmd->add_option("--columns", sweep_a.columns, "explicit probe columns, e.g. 0,3,7");
  sweep_cmd->add_option("--seed", sweep_a.seed, "seed for the default Gaussian input");
  sweep_a.tol.attach(sweep_cmd);
  sweep_cmd->add_option("--out", sweep_a.out, "write the sweep CSV here");

  detail::ChainArgs chain_a;
  CLI::App* chain_cmd = app.add_subcommand("chain", "linear Gaussian chain rank experiment");
  chain_cmd->add_option("--width", chain_a.width, "chain width n")->required();
  chain_cmd->add_option("--depth", chain_a.depth, "chain depth L")->required();
  chain_cmd->add_option("--seed", chain_a.seed, "master seed");
  chain_a.tol.attach(chain_cmd);
  chain_cmd->add_option("--out", chain_a.out, "write the per-depth CSV here");

  detail::LyapArgs lyap_a;
  CLI::App* lyap_cmd = app.add_subcommand("lyapunov", "Monte Carlo Lyapunov spectrum vs theory");
  lyap_cmd->add_option("--n", lyap_a.n, "matrix dimension")->required();
  lyap_cmd->add_option("--depth", lyap_a.depth, "product depth L")->required();
  lyap_cmd->add_option("--trials", lyap_a.trials, "Monte Carlo trials")->required();
  lyap_cmd->add_option("--seed", lyap_a.seed, "master seed");
  lyap_cmd->add_option("--out", lyap_a.out, "write the estimate CSV here");

  detail::CollapseArgs collapse_a;
  CLI::App* collapse_cmd = app.add_subcommand("collapse", "predicted rank-collapse depth");
  collapse_cmd->add_option("--n", collapse_a.n, "chain dimension")->required();
  collapse_cmd->add_option("--rate", collapse_a.rate, "measured per-step ratio (default: theory)");
  collapse_cmd->add_option("--check-trials", collapse_a.check_trials,
                           "also simulate this many chains at the predicted depth");
  collapse_cmd->add_option("--seed", collapse_a.seed, "seed for --check-trials");
  collapse_a.tol.attach(collapse_cmd);
  collapse_cmd->add_option("--out", collapse_a.out, "write a JSON summary here");

  detail::ClsDimArgs clsdim_a;
  CLI::App* clsdim_cmd = app.add_subcommand("clsdim", "classification dimension of a feature set");
  clsdim_cmd->add_option("--features", clsdim_a.features, "feature matrix CSV (N x d)")->required();
  clsdim_cmd->add_option("--labels", clsdim_a.labels, "label vector CSV")->required();
  clsdim_cmd->add_option("--head", clsdim_a.head, "linear head CSV (classes x d)")->required();
  clsdim_cmd->add_option("--retention", clsdim_a.retention, "accuracy retention target (default 0.95)");
  clsdim_cmd->add_option("--mode", clsdim_a.mode, "relative or absolute (default relative)");
  clsdim_cmd->add_option("--out", clsdim_a.out, "write a JSON summary here");

  detail::PertDimArgs pert_a;
  CLI::App* pert_cmd = app.add_subcommand("pertdim", "perturbed-neighborhood PCA dimension");
  pert_cmd->add_option("--net", pert_a.net, "NetworkSpec JSON file")->required();
  pert_cmd->add_option("--depth", pert_a.depth, "probe depth k (default 1)");
  pert_cmd->add_option("--points", pert_a.points, "evaluation points (default 100)");
  pert_cmd->add_option("--samples", pert_a.samples, "perturbations per point (default 2000)");
  pert_cmd->add_option("--noise-std", pert_a.noise_std, "perturbation std (default 1e-3)");
  pert_cmd->add_option("--seed", pert_a.seed, "master seed");
  pert_cmd->add_option("--out", pert_a.out, "write a JSON summary here");

  detail::StructuralArgs struct_a;
  CLI::App* struct_cmd = app.add_subcommand("structural", "PCA dimension and Jacobian rank across one component");
  struct_cmd->add_option("--component", struct_a.component, "layer JSON file");
  struct_cmd->add_option("--kind", struct_a.kind, "built-in component: relu, gelu, silu, layer_norm, dense");
  struct_cmd->add_option("--out-dim", struct_a.out_dim, "output width for --kind dense");
  struct_cmd->add_option("--width", struct_a.width, "component input width")->required();
  struct_cmd->add_option("--batch", struct_a.batch, "probe batch size (default max(256, width + 56))");
  struct_cmd->add_option("--seed", struct_a.seed, "master seed");
  struct_a.tol.attach(struct_cmd);
  struct_cmd->add_option("--out", struct_a.out, "write a JSON summary here");

  detail::DeficitArgs deficit_a;
  CLI::App* deficit_cmd = app.add_subcommand("deficit", "pinned Lasso independence deficit of one category");
  deficit_cmd->add_option("--logits", deficit_a.logits, "logits CSV with a trailing label column")->required();
  deficit_cmd->add_option("--target", deficit_a.target, "target category index")->required();
  deficit_cmd->add_option("--eta", deficit_a.eta, "L1 penalty (default 1e-3)");
  deficit_cmd->add_option("--max-iterations", deficit_a.max_iterations, "sweep cap (default 10000)");
  deficit_cmd->add_option("--tol", deficit_a.tol, "coordinate-change tolerance (default 1e-8)");
  deficit_cmd->add_option("--out", deficit_a.out, "write the solution JSON here");

  detail::ProbArgs prob_a;
  CLI::App* prob_cmd = app.add_subcommand("prob", "Gaussian rank-deficiency probability");
  prob_cmd->add_option("--rows", prob_a.rows, "matrix rows")->required();
  prob_cmd->add_option("--cols", prob_a.cols, "matrix cols")->required();
  prob_cmd->add_option("--eps", prob_a.eps, "relative tolerance (repeatable)")->required();
  prob_cmd->add_option("--trials", prob_a.trials, "Monte Carlo trials")->required();
  prob_cmd->add_option("--seed", prob_a.seed, "master seed");
  prob_cmd->add_option("--out", prob_a.out, "write the estimate CSV here");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("rankscope");
  for (const std::string& s : args) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    set_threads(threads);
    if (*rank_cmd)
      detail::run_rank(rank_a);
    else if (*sweep_cmd)
      detail::run_sweep(sweep_a);
    else if (*chain_cmd)
      detail::run_chain(chain_a);
    else if (*lyap_cmd)
      detail::run_lyapunov(lyap_a);
    else if (*collapse_cmd)
      detail::run_collapse(collapse_a);
    else if (*clsdim_cmd)
      detail::run_clsdim(clsdim_a);
    else if (*pert_cmd)
      detail::run_pertdim(pert_a);
    else if (*struct_cmd)
      detail::run_structural(struct_a);
    else if (*deficit_cmd)
      detail::run_deficit(deficit_a);
    else if (*prob_cmd)
      detail::run_prob(prob_a);
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const compute_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace rankscope::cli
