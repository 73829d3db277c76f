// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text formats: comma-separated traces with a `# config_hash=… seed=…` header
// line, JSON for nets, datasets and conjugacy verdicts. Floats are written in
// shortest round-trip form so equal values always produce equal bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gradflow/flow.hpp"
#include "gradflow/losses.hpp"
#include "gradflow/network.hpp"
#include "gradflow/oracles.hpp"
#include "gradflow/spectra.hpp"

namespace gradflow {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest decimal that parses back to v; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// "# config_hash=<16 hex digits> seed=<seed>\n"
std::string header_line(std::uint64_t config_hash, std::uint64_t seed);

// Columns: time, loss, train_error, test_error, norm_l1..norm_lK,
// margin_cosine, nullspace_norm, residual_norm, perturbation_count.
std::string trace_csv(const TrajectoryTrace& trace, std::size_t layers);

// Columns: index, eigenvalue, class.
std::string spectrum_csv(const SpectrumReport& report);

std::string verdict_json(const ConjugacyVerdict& verdict);
std::string margin_json(const SvmResult& result);

// {"activation", "epsilon", "coefficients", "activate_output",
//  "layers": [{"shape": [r, c], "data": [...]}]}
std::string net_to_json(const DeepNet& net);
DeepNet net_from_json(std::string_view text);

// {"inputs": [[...]], "labels": [...], "task": "binary"|"multiclass"|"regression"}
std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace gradflow
