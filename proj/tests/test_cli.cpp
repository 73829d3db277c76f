// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "gradflow/io.hpp"

namespace fs = std::filesystem;
using gradflow::read_file;
using gradflow::write_file;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "gradflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gradflow::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& text) const {
    write_file(path / name, text);
    return (path / name).string();
  }
};

const char* kFlow = R"({
  "seed": 2,
  "dataset": {"generator": "separable_2d", "n": 6},
  "net": {"widths": [2, 1], "activation": "linear"},
  "loss": "exponential",
  "step": 0.1,
  "stop": {"kind": "max_time", "max_time": 20},
  "record": {"every_steps": 20},
  "track_svm": true
})";

}  // namespace

TEST_CASE("unknown subcommands and bad flags are usage errors") {
  unsetenv("GRADFLOW_SEED");
  const auto r = run({"bogus"});
  CHECK(r.code == gradflow::cli::kUsage);
  CHECK(r.err.find("unknown subcommand 'bogus'") != std::string::npos);
  CHECK(run({"svm"}).code == gradflow::cli::kUsage);  // --config is required
  CHECK(run({"svm", "--config", "x.json", "--nope"}).code == gradflow::cli::kUsage);
  CHECK(run({"--help"}).code == gradflow::cli::kOk);
}

TEST_CASE("missing config names the path") {
  unsetenv("GRADFLOW_SEED");
  const auto r = run({"svm", "--config", "/nonexistent/two_points.json"});
  CHECK(r.code == gradflow::cli::kInvalid);
  CHECK(r.err.find("/nonexistent/two_points.json") != std::string::npos);
}

TEST_CASE("svm on the antipodal pair") {
  unsetenv("GRADFLOW_SEED");
  TempDir dir("gradflow_cli_svm");
  const auto cfg = dir.file("two_points.json", R"({"dataset": {"inputs": [[1, 0], [-1, 0]], "labels": [1, -1], "task": "binary"}})");
  const auto r = run({"svm", "--config", cfg, "-o", dir.path.string()});
  REQUIRE(r.code == gradflow::cli::kOk);
  const std::string margin = read_file(dir.path / "margin.json");
  CHECK(margin.find("\"w_raw\":[1,0]") != std::string::npos);
  CHECK(margin.find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("validation errors exit 1 and name the field") {
  unsetenv("GRADFLOW_SEED");
  TempDir dir("gradflow_cli_invalid");
  const auto extra = dir.file("extra.json", R"({"dataset": {"generator": "separable_2d", "n": 4}, "extra": 1})");
  auto r = run({"svm", "--config", extra});
  CHECK(r.code == gradflow::cli::kInvalid);
  CHECK(r.err.find("extra") != std::string::npos);
  const auto typed = dir.file("typed.json", R"({"layers": "two"})");
  r = run({"growth", "--config", typed});
  CHECK(r.code == gradflow::cli::kInvalid);
  CHECK(r.err.find("layers") != std::string::npos);
  setenv("GRADFLOW_SEED", "abc", 1);
  const auto ok = dir.file("ok.json", R"({"dataset": {"generator": "separable_2d", "n": 4}})");
  r = run({"svm", "--config", ok, "-o", dir.path.string()});
  CHECK(r.code == gradflow::cli::kInvalid);
  CHECK(r.err.find("GRADFLOW_SEED") != std::string::npos);
  unsetenv("GRADFLOW_SEED");
}

TEST_CASE("--check turns predicate failures into exit 2") {
  unsetenv("GRADFLOW_SEED");
  TempDir dir("gradflow_cli_check");
  const auto good = dir.file("good.json", R"({"layers": [1, 2]})");
  CHECK(run({"growth", "--config", good, "-o", dir.path.string(), "--check", "-q"}).code == gradflow::cli::kOk);
  const auto strict = dir.file("strict.json", R"({"layers": [1, 2], "closed_form_tolerance": 1e-300})");
  const auto r = run({"growth", "--config", strict, "-o", dir.path.string(), "--check"});
  CHECK(r.code == gradflow::cli::kCheckFailed);
  CHECK(r.out.find("FAIL") != std::string::npos);
  // Without --check the same failure still exits 0.
  CHECK(run({"growth", "--config", strict, "-o", dir.path.string(), "-q"}).code == gradflow::cli::kOk);
}

TEST_CASE("flow outputs are byte-identical across runs") {
  unsetenv("GRADFLOW_SEED");
  TempDir dir("gradflow_cli_flow");
  const auto cfg = dir.file("flow.json", kFlow);
  const fs::path a = dir.path / "a", b = dir.path / "b", c = dir.path / "c";
  REQUIRE(run({"flow", "--config", cfg, "-o", a.string()}).code == gradflow::cli::kOk);
  REQUIRE(run({"flow", "--config", cfg, "-o", b.string()}).code == gradflow::cli::kOk);
  for (const char* f : {"flow_trace.csv", "flow_final_net.json", "flow_summary.json"})
    CHECK(read_file(a / f) == read_file(b / f));
  const std::string trace = read_file(a / "flow_trace.csv");
  CHECK(trace.rfind("# config_hash=", 0) == 0);
  CHECK(trace.find(" seed=2\n") != std::string::npos);

  // --seed beats GRADFLOW_SEED, which beats the config.
  setenv("GRADFLOW_SEED", "5", 1);
  REQUIRE(run({"flow", "--config", cfg, "-o", c.string()}).code == gradflow::cli::kOk);
  CHECK(read_file(c / "flow_trace.csv").find(" seed=5\n") != std::string::npos);
  REQUIRE(run({"flow", "--config", cfg, "-o", c.string(), "--seed", "8"}).code == gradflow::cli::kOk);
  CHECK(read_file(c / "flow_trace.csv").find(" seed=8\n") != std::string::npos);
  unsetenv("GRADFLOW_SEED");
}

TEST_CASE("spectrum writes spectra, sweep and verdict") {
  unsetenv("GRADFLOW_SEED");
  TempDir dir("gradflow_cli_spectrum");
  const auto cfg = dir.file("spectrum.json", R"({
    "dataset": {"inputs": [[1, 0.5], [-0.2, 1]], "labels": [0.3, -0.4], "task": "regression"},
    "net": {"activation": "linear", "layers": [{"shape": [1, 2], "data": [0.1, 0.2]}]},
    "loss": "square", "sweep": [0.1, 0], "compare_virtual": false})");
  const auto r = run({"spectrum", "--config", cfg, "-o", dir.path.string()});
  REQUIRE(r.code == gradflow::cli::kOk);
  CHECK(read_file(dir.path / "spectrum.csv").find("index,eigenvalue,class") != std::string::npos);
  CHECK(fs::exists(dir.path / "spectrum_summary.json"));
  CHECK(fs::exists(dir.path / "sweep.csv"));
}
