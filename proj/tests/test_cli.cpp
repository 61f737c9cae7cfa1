// File-format helpers and the command-line layer, driven in process through
// cli::run with captured output and scratch files.
#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rankscope/cli.hpp"

using namespace rankscope;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = 0;
  std::string out;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream captured_out, captured_err;
  std::streambuf* old_out = std::cout.rdbuf(captured_out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(captured_err.rdbuf());
  CliResult res;
  try {
    res.exit_code = cli::run(args);
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  res.out = captured_out.str();
  return res;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "rankscope_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string scratch(const std::string& name) { return (scratch_dir() / name).string(); }

Matrix gaussian_mat(int rows, int cols, std::uint64_t seed) {
  GaussianStream g(seed);
  return gaussian_matrix(rows, cols, g);
}

}  // namespace

TEST_CASE("format_double and parse_double round trip doubles exactly") {
  for (double v : {0.0, -0.0, 1.0, -1.5, 3.141592653589793, 2.38e-7, 1e-300, -4.9e18, 0.1}) {
    const double back = parse_double(format_double(v), "test");
    REQUIRE(std::memcmp(&back, &v, sizeof v) == 0);
  }
  REQUIRE(parse_double("  3.5\t", "test") == 3.5);
  REQUIRE_THROWS_AS(parse_double("", "test"), input_error);
  REQUIRE_THROWS_AS(parse_double("   ", "test"), input_error);
  REQUIRE_THROWS_AS(parse_double("abc", "test"), input_error);
  REQUIRE_THROWS_AS(parse_double("1.2x", "test"), input_error);
}

TEST_CASE("matrix csv round trips bit-exactly") {
  const Matrix m = gaussian_mat(5, 3, 42);
  const std::string path = scratch("roundtrip.csv");
  write_matrix_csv(path, m);
  const Matrix back = read_matrix_csv(path);
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 3);
  REQUIRE(back.data() == m.data());

  REQUIRE_THROWS_AS(read_matrix_csv(scratch("missing.csv")), input_error);
  write_text_file(scratch("ragged.csv"), "1,2\n3\n");
  REQUIRE_THROWS_AS(read_matrix_csv(scratch("ragged.csv")), input_error);
}

TEST_CASE("vector csv accepts a row or a column") {
  write_text_file(scratch("row.csv"), "1,2,3\n");
  REQUIRE(read_vector_csv(scratch("row.csv")) == std::vector<double>{1, 2, 3});
  write_text_file(scratch("col.csv"), "1\n2\n3\n");
  REQUIRE(read_vector_csv(scratch("col.csv")) == std::vector<double>{1, 2, 3});
  write_text_file(scratch("block.csv"), "1,2\n3,4\n");
  REQUIRE_THROWS_AS(read_vector_csv(scratch("block.csv")), input_error);
}

TEST_CASE("logits csv round trips and validates labels") {
  const Matrix logits = gaussian_mat(6, 3, 9);
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  const std::string path = scratch("logits.csv");
  write_logits_csv(path, logits, labels);
  const LogitsData data = read_logits_csv(path);
  REQUIRE(data.logits.data() == logits.data());
  REQUIRE(data.labels == labels);

  write_text_file(scratch("bad_header.csv"), "0,1,2\n1,2,3\n");
  REQUIRE_THROWS_AS(read_logits_csv(scratch("bad_header.csv")), input_error);
  write_text_file(scratch("frac_label.csv"), "0,1,label\n0.5,0.2,1.5\n");
  REQUIRE_THROWS_AS(read_logits_csv(scratch("frac_label.csv")), input_error);
  write_text_file(scratch("oob_label.csv"), "0,1,label\n0.5,0.2,2\n");
  REQUIRE_THROWS_AS(read_logits_csv(scratch("oob_label.csv")), input_error);
}

TEST_CASE("rank subcommand prints the rank and writes a reproducible manifest") {
  const std::string mat = scratch("rank_in.csv");
  write_matrix_csv(mat, diagonal({5.0, 3.0, 1e-9}));
  const std::string out1 = scratch("rank_out1.json");

  const CliResult r = run_cli(
      {"rank", "--matrix", mat, "--eps-mode", "relative", "--eps", "1e-6", "--out", out1});
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out == "2\n");

  const auto summary = nlohmann::json::parse(read_text_file(out1));
  REQUIRE(summary.at("rank") == 2);
  REQUIRE(summary.at("rows") == 3);
  REQUIRE(summary.at("cols") == 3);
  REQUIRE(summary.at("epsilon").get<double>() == 1e-6);
  REQUIRE(summary.at("spectral_norm").get<double>() == 5.0);

  // Re-run from the manifest into a fresh path: byte-identical output.
  auto manifest = nlohmann::json::parse(read_text_file(out1 + ".manifest.json"));
  REQUIRE(manifest.at("subcommand") == "rank");
  REQUIRE(manifest.at("seed").is_null());
  const std::string out2 = scratch("rank_out2.json");
  manifest["outputs"] = {out2};
  const CliResult r2 = run_cli(cli::manifest_to_argv(manifest));
  REQUIRE(r2.exit_code == 0);
  REQUIRE(read_text_file(out2) == read_text_file(out1));
  const auto manifest2 = nlohmann::json::parse(read_text_file(out2 + ".manifest.json"));
  REQUIRE(manifest2.at("parameters") == manifest.at("parameters"));
}

TEST_CASE("sampling subcommands refuse to run without a seed") {
  REQUIRE(run_cli({"chain", "--width", "4", "--depth", "3"}).exit_code == 2);
  REQUIRE(run_cli({"lyapunov", "--n", "2", "--depth", "10", "--trials", "2"}).exit_code == 2);
  const std::string net = scratch("seedless_net.json");
  write_text_file(net, R"({"input_dim": 3, "layers": [{"kind": "activation", "fn": "relu"}]})");
  REQUIRE(run_cli({"sweep", "--net", net}).exit_code == 2);
}

TEST_CASE("malformed invocations exit with status 2") {
  REQUIRE(run_cli({"rank", "--matrix", "x.csv", "--bogus-flag"}).exit_code == 2);
  REQUIRE(run_cli({}).exit_code == 2);  // a subcommand is required
  REQUIRE(run_cli({"rank", "--matrix", scratch("absent.csv")}).exit_code == 2);
  const std::string mat = scratch("tol_in.csv");
  write_matrix_csv(mat, identity(2));
  REQUIRE(run_cli({"rank", "--matrix", mat, "--eps-mode", "relative"}).exit_code == 2);
  const std::string bad_net = scratch("bad_net.json");
  write_text_file(bad_net, "{broken");
  REQUIRE(run_cli({"sweep", "--net", bad_net, "--seed", "1"}).exit_code == 2);
  REQUIRE(run_cli({"collapse", "--n", "2", "--rate", "1.5"}).exit_code == 2);
}

TEST_CASE("help and version exit cleanly") {
  REQUIRE(run_cli({"--help"}).exit_code == 0);
  const CliResult v = run_cli({"--version"});
  REQUIRE(v.exit_code == 0);
  REQUIRE_FALSE(v.out.empty());
}

TEST_CASE("collapse subcommand predicts the float32 depth for width two") {
  const std::string out = scratch("collapse.json");
  const CliResult r = run_cli({"collapse", "--n", "2", "--out", out});
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(read_text_file(out));
  REQUIRE(j.at("predicted_depth") == 22);
  REQUIRE(j.at("rate").get<double>() == Catch::Approx(0.5).margin(1e-11));

  const CliResult checked =
      run_cli({"collapse", "--n", "2", "--check-trials", "20", "--seed", "3", "--out", out});
  REQUIRE(checked.exit_code == 0);
  const auto jc = nlohmann::json::parse(read_text_file(out));
  const double frac = jc.at("check").at("rank_one_fraction").get<double>();
  REQUIRE(frac >= 0.0);
  REQUIRE(frac <= 1.0);
}

TEST_CASE("lyapunov subcommand reports per-index agreement") {
  const std::string out = scratch("lyap.csv");
  const CliResult r =
      run_cli({"lyapunov", "--n", "2", "--depth", "200", "--trials", "8", "--seed", "5", "--out", out});
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("k=1 lambda_hat=") != std::string::npos);
  REQUIRE(r.out.find("k=2 lambda_hat=") != std::string::npos);
  const std::string csv = read_text_file(out);
  REQUIRE(csv.rfind("k,lambda_hat,stderr,theory,abs_error,z_score\n", 0) == 0);
  const auto manifest = nlohmann::json::parse(read_text_file(out + ".manifest.json"));
  REQUIRE(manifest.at("seed") == 5);

  // Re-run from the manifest: identical CSV bytes.
  const std::string out2 = scratch("lyap2.csv");
  auto m2 = manifest;
  m2["outputs"] = {out2};
  REQUIRE(run_cli(cli::manifest_to_argv(m2)).exit_code == 0);
  REQUIRE(read_text_file(out2) == csv);
}

TEST_CASE("deficit subcommand keeps accuracy for an exact dependency") {
  // Column 2 is exactly 0.8 z0 - 0.5 z3.
  Matrix z = gaussian_mat(60, 4, 77);
  for (int t = 0; t < 60; ++t) z(t, 2) = 0.8 * z(t, 0) - 0.5 * z(t, 3);
  std::vector<int> labels(60);
  for (int t = 0; t < 60; ++t) {
    int best = 0;
    for (int j = 1; j < 4; ++j)
      if (z(t, j) > z(t, best)) best = j;
    labels[static_cast<std::size_t>(t)] = best;
  }
  const std::string logits = scratch("deficit_logits.csv");
  write_logits_csv(logits, z, labels);
  const std::string out = scratch("deficit.json");
  const CliResult r = run_cli(
      {"deficit", "--logits", logits, "--target", "2", "--eta", "1e-6", "--out", out});
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(read_text_file(out));
  REQUIRE(j.at("target") == 2);
  REQUIRE(j.at("converged") == true);
  REQUIRE(j.at("substituted_accuracy") == j.at("original_accuracy"));
  bool found = false;
  for (const auto& c : j.at("coefficients")) {
    if (c.at("index") == 0) {
      found = true;
      REQUIRE(c.at("value").get<double>() == Catch::Approx(0.8).margin(1e-3));
    }
  }
  REQUIRE(found);
}

TEST_CASE("prob subcommand writes one row per epsilon") {
  const std::string out = scratch("prob.csv");
  const CliResult r = run_cli({"prob", "--rows", "8", "--cols", "8", "--eps", "1e-6", "--eps",
                               "1e-1", "--trials", "40", "--seed", "2", "--out", out});
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> lines = read_lines(out);
  REQUIRE(lines.size() == 3);
  REQUIRE(lines[0] == "epsilon,estimate,stderr,trials");

  const std::string out2 = scratch("prob2.csv");
  auto manifest = nlohmann::json::parse(read_text_file(out + ".manifest.json"));
  manifest["outputs"] = {out2};
  REQUIRE(run_cli(cli::manifest_to_argv(manifest)).exit_code == 0);
  REQUIRE(read_text_file(out2) == read_text_file(out));
}

TEST_CASE("sweep subcommand reads explicit inputs and writes the per-depth csv") {
  NetworkSpec spec;
  spec.input_dim = 4;
  spec.layers = {dense_explicit(identity(4)), activation(ActKind::GELU)};
  const std::string net = scratch("sweep_net.json");
  write_text_file(net, to_json(spec).dump(2) + "\n");
  const std::string input = scratch("sweep_input.csv");
  write_text_file(input, "0.5,-1.25,2,0.75\n");
  const std::string out = scratch("sweep.csv");
  const CliResult r = run_cli({"sweep", "--net", net, "--input", input, "--out", out});
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> lines = read_lines(out);
  REQUIRE(lines.size() == 3);
  REQUIRE(lines[0] == "depth,partial_rank,K,epsilon");
  REQUIRE(lines[1].rfind("1,4,4,", 0) == 0);
  REQUIRE(lines[2].rfind("2,4,4,", 0) == 0);
}
