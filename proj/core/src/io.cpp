// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gradflow {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return buf.data();
}

std::string header_line(std::uint64_t config_hash, std::uint64_t seed) {
  return "# config_hash=" + hex64(config_hash) + " seed=" + std::to_string(seed) + "\n";
}

std::string trace_csv(const TrajectoryTrace& trace, std::size_t layers) {
  std::string out = "time,loss,train_error,test_error";
  for (std::size_t k = 1; k <= layers; ++k) out += ",norm_l" + std::to_string(k);
  out += ",margin_cosine,nullspace_norm,residual_norm,perturbation_count\n";
  for (const auto& r : trace.records) {
    out += format_double(r.time) + ',' + format_double(r.loss) + ',' + format_double(r.train_error) +
           ',' + format_double(r.test_error);
    for (std::size_t k = 0; k < layers; ++k)
      out += ',' + format_double(k < r.layer_norms.size() ? r.layer_norms[k] : std::nan(""));
    out += ',' + format_double(r.margin_cosine) + ',' + format_double(r.nullspace_norm) + ',' +
           format_double(r.residual_norm) + ',' + std::to_string(r.perturbation_count) + '\n';
  }
  return out;
}

std::string spectrum_csv(const SpectrumReport& report) {
  std::string out = "index,eigenvalue,class\n";
  for (std::size_t i = 0; i < report.eigenvalues.size(); ++i) {
    const double v = report.eigenvalues[i];
    const char* cls = std::fabs(v) <= report.zero_threshold ? "zero" : (v > 0 ? "stable" : "unstable");
    out += std::to_string(i) + ',' + format_double(v) + ',' + cls + '\n';
  }
  return out;
}

namespace {

// Numbers go through format_double so JSON and CSV agree byte for byte.
std::string number(double v) {
  if (!std::isfinite(v)) return "null";
  return format_double(v);
}

std::string number_list(std::span<const double> v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += number(v[i]);
  }
  return out + ']';
}

std::string counts(const SpectrumReport& r) {
  return "{\"stable\":" + std::to_string(r.n_stable) + ",\"unstable\":" +
         std::to_string(r.n_unstable) + ",\"zero\":" + std::to_string(r.n_zero) + '}';
}

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("malformed ") + what + " JSON: " + e.what());
  }
}

template <class T>
T field(const json& j, const char* name, const char* what) {
  if (!j.contains(name)) throw IoError(std::string(what) + " is missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw IoError(std::string(what) + " field '" + name + "' has the wrong type");
  }
}

}  // namespace

std::string verdict_json(const ConjugacyVerdict& v) {
  std::string out = "{\"topological\":";
  out += v.topologically_conjugate ? "true" : "false";
  out += ",\"differentiable_candidate\":";
  out += v.differentiably_conjugate_candidate ? "true" : "false";
  out += ",\"counts_a\":" + counts(v.a) + ",\"counts_b\":" + counts(v.b);
  out += ",\"exponent_map\":" + (v.exponent_map ? number_list(*v.exponent_map) : "null");
  out += ",\"convention\":\"" + std::string(kHessianConvention) + "\"}\n";
  return out;
}

std::string margin_json(const SvmResult& r) {
  if (!r.separable()) {
    std::string out = "{\"separable\":false,\"sign_pattern\":[";
    for (std::size_t i = 0; i < r.sign_pattern.size(); ++i)
      out += (i ? "," : "") + std::to_string(r.sign_pattern[i]);
    out += "],\"violated_indices\":[";
    for (std::size_t i = 0; i < r.violated_indices.size(); ++i)
      out += (i ? "," : "") + std::to_string(r.violated_indices[i]);
    return out + "]}\n";
  }
  const auto& s = *r.solution;
  std::string out = "{\"separable\":true,\"w_tilde\":" + number_list(s.w_tilde) +
                    ",\"w_raw\":" + number_list(s.w_raw) + ",\"margin\":" + number(s.margin) +
                    ",\"support_indices\":[";
  for (std::size_t i = 0; i < s.support_indices.size(); ++i)
    out += (i ? "," : "") + std::to_string(s.support_indices[i]);
  return out + "]}\n";
}

std::string net_to_json(const DeepNet& net) {
  std::string out = "{\"activation\":\"" + std::string(to_string(net.activation().kind)) + "\"";
  out += ",\"epsilon\":" + number(net.activation().epsilon);
  out += ",\"coefficients\":" + number_list(net.activation().coefficients);
  out += std::string(",\"activate_output\":") + (net.activate_output() ? "true" : "false");
  out += ",\"layers\":[";
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const auto& w = net.layer(k);
    if (k) out += ',';
    out += "{\"shape\":[" + std::to_string(w.rows()) + ',' + std::to_string(w.cols()) +
           "],\"data\":" + number_list(w.data()) + '}';
  }
  return out + "]}\n";
}

DeepNet net_from_json(std::string_view text) {
  const json j = parse(text, "network");
  Activation act;
  try {
    act.kind = activation_kind_from_string(field<std::string>(j, "activation", "network"));
  } catch (const NetworkError& e) {
    throw IoError(std::string("network field 'activation': ") + e.what());
  }
  if (j.contains("epsilon")) act.epsilon = field<double>(j, "epsilon", "network");
  if (j.contains("coefficients"))
    act.coefficients = field<std::vector<double>>(j, "coefficients", "network");
  const bool activate_output =
      j.contains("activate_output") && field<bool>(j, "activate_output", "network");
  const json layers = field<json>(j, "layers", "network");
  if (!layers.is_array() || layers.empty()) throw IoError("network field 'layers' must be a non-empty array");
  std::vector<Matrix> ws;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string what = "layer " + std::to_string(k + 1);
    const auto shape = field<std::vector<std::size_t>>(layers[k], "shape", what.c_str());
    auto data = field<std::vector<double>>(layers[k], "data", what.c_str());
    if (shape.size() != 2 || shape[0] * shape[1] != data.size())
      throw IoError(what + " shape does not match its data length");
    ws.emplace_back(shape[0], shape[1], std::move(data));
  }
  try {
    return DeepNet(std::move(ws), act, activate_output);
  } catch (const NetworkError& e) {
    throw IoError(e.what());
  }
}

std::string dataset_to_json(const Dataset& data) {
  std::string out = "{\"task\":\"" + std::string(to_string(data.task)) + "\",\"inputs\":[";
  for (std::size_t n = 0; n < data.size(); ++n) out += (n ? "," : "") + number_list(data.inputs[n]);
  out += "],\"labels\":" + number_list(data.labels) + "}\n";
  return out;
}

Dataset dataset_from_json(std::string_view text) {
  const json j = parse(text, "dataset");
  Dataset d;
  d.inputs = field<std::vector<Vector>>(j, "inputs", "dataset");
  d.labels = field<Vector>(j, "labels", "dataset");
  d.task = j.contains("task") ? task_kind_from_string(field<std::string>(j, "task", "dataset"))
                              : TaskKind::binary;
  d.validate();
  return d;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace gradflow
