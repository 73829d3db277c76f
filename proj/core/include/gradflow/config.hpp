// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON configs, one schema per subcommand. Unknown fields are rejected and
// every error names the offending field by its dotted path.
//
// Nets and datasets may be given inline, as a path relative to the config
// file, or as a generator:
//   net:     {"widths": [2, 8, 1], "activation": "relu", "scale": 1}
//   dataset: {"generator": "separable_2d", "n": 10, "gap": 0.1}
//            {"generator": "blobs", "n": 30, "separation": 2, "std": 0.6}
//            {"generator": "sine", "n": 9, "points": "chebyshev",
//             "degree": 39, "frequency": 4, "basis": "monomial"}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gradflow/experiments.hpp"
#include "gradflow/flow.hpp"
#include "gradflow/losses.hpp"
#include "gradflow/network.hpp"
#include "gradflow/spectra.hpp"

namespace gradflow {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConfigContext {
  std::filesystem::path base_dir;  // relative net and dataset paths resolve here
  // Takes precedence over the config's "seed" field (default 1).
  std::optional<std::uint64_t> seed_override;
};

struct FlowConfig {
  std::uint64_t seed = 1;
  DeepNet net;
  Dataset data;
  std::optional<Dataset> test;
  LossKind loss = LossKind::exponential;
  FlowState state;  // net, step, integrator, step rule, λ
  StopRule stop;
  RecordCadence cadence;
  bool track_svm = false;        // margin cosine against the SVM oracle
  bool track_null_space = false;  // ‖P_null w‖ for one-layer linear nets
};

struct SpectrumConfig {
  std::uint64_t seed = 1;
  DeepNet net;
  Dataset data;
  LossKind loss = LossKind::square;
  Vector lambdas;
  double tol = kDefaultZeroTol;
  Vector sweep;  // λ values; empty skips the sweep
  SweepOptions sweep_options;
  bool compare_virtual = false;
};

struct SvmConfig {
  std::uint64_t seed = 1;
  Dataset data;
};

struct PerturbConfig {
  enum class Scenario { sine, sine_control, toy_net };
  Scenario scenario = Scenario::sine;
  SineConfig sine;
  ToyNetConfig toy;
  std::uint64_t seed() const { return scenario == Scenario::toy_net ? toy.seed : sine.seed; }
};

FlowConfig parse_flow_config(std::string_view text, const ConfigContext& ctx);
SpectrumConfig parse_spectrum_config(std::string_view text, const ConfigContext& ctx);
SvmConfig parse_svm_config(std::string_view text, const ConfigContext& ctx);
PerturbConfig parse_perturb_config(std::string_view text, const ConfigContext& ctx);
GrowthConfig parse_growth_config(std::string_view text, const ConfigContext& ctx);
SweepConfig parse_sweep_config(std::string_view text, const ConfigContext& ctx);
DirectionConfig parse_direction_config(std::string_view text, const ConfigContext& ctx);

// FNV-1a of the compact, key-sorted JSON with any top-level "seed" removed,
// so formatting and the seed source do not change the hash.
std::uint64_t config_hash(std::string_view text);

}  // namespace gradflow
