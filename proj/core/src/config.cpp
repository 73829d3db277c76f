// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/config.hpp"

#include <set>
#include <type_traits>

#include "gradflow/io.hpp"
#include "json.hpp"

namespace gradflow {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

std::string type_name(const json& v) {
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_boolean()) return "a boolean";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "null";
}

// Reads fields of one JSON object and remembers which were consumed, so
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError((path_.empty() ? std::string("config") : "field '" + path_ + "'") +
                        " must be a JSON object");
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required field '" + path(key) + "'");
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    const json& v = raw(key);
    return convert<T>(v, path(key));
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? convert<T>(j_.at(key), path(key)) : fallback;
  }

  template <class T>
  void read(const std::string& key, T& target) {
    if (has(key)) target = convert<T>(j_.at(key), path(key));
  }

  // Enum-valued string field; parse errors are re-thrown naming the field.
  template <class E, class Parse>
  void read_enum(const std::string& key, E& target, Parse parse) {
    if (!has(key)) return;
    const auto s = convert<std::string>(j_.at(key), path(key));
    try {
      target = parse(s);
    } catch (const std::exception& e) {
      throw ConfigError("field '" + path(key) + "': " + e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown field '" + path(it.key()) + "'");
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, json>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("field '" + where + "' must be a boolean, got " + type_name(v));
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("field '" + where + "' must be a string, got " + type_name(v));
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("field '" + where + "' must be a number, got " + type_name(v));
      return v.get<double>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned())
        throw ConfigError("field '" + where + "' must be a non-negative integer");
      return static_cast<T>(v.get<std::uint64_t>());
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("field '" + where + "' must be an integer");
      return static_cast<T>(v.get<std::int64_t>());
    } else {
      // std::vector of one of the above.
      if (!v.is_array()) throw ConfigError("field '" + where + "' must be an array, got " + type_name(v));
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

std::uint64_t resolve_seed(Reader& r, const ConfigContext& ctx) {
  const auto from_file = r.get_or<std::uint64_t>("seed", 1);
  return ctx.seed_override.value_or(from_file);
}

std::string load_relative(const std::string& file, const ConfigContext& ctx, const std::string& where) {
  std::filesystem::path p(file);
  if (p.is_relative()) p = ctx.base_dir / p;
  try {
    return read_file(p);
  } catch (const IoError& e) {
    throw ConfigError("field '" + where + "': " + e.what());
  }
}

Activation read_activation(Reader& r) {
  Activation act;
  r.read_enum("activation", act.kind, activation_kind_from_string);
  r.read("epsilon", act.epsilon);
  r.read("coefficients", act.coefficients);
  return act;
}

DeepNet read_net(const json& v, const std::string& where, const ConfigContext& ctx, Rng& rng) {
  try {
    if (v.is_string()) return net_from_json(load_relative(v.get<std::string>(), ctx, where));
    Reader r(v, where);
    if (r.has("layers")) {
      // Inline weights in the net file format.
      return net_from_json(v.dump());
    }
    const auto widths = r.get<std::vector<std::size_t>>("widths");
    const Activation act = read_activation(r);
    const double scale = r.get_or("scale", 1.0);
    const bool activate_output = r.get_or("activate_output", false);
    r.finish();
    if (widths.size() < 2) throw ConfigError("field '" + where + ".widths' needs at least two entries");
    auto net = DeepNet::random(widths, act, rng, scale);
    return activate_output ? DeepNet(net.layers(), act, true) : net;
  } catch (const IoError& e) {
    throw ConfigError("field '" + where + "': " + e.what());
  } catch (const NetworkError& e) {
    throw ConfigError("field '" + where + "': " + e.what());
  }
}

Dataset read_dataset(const json& v, const std::string& where, const ConfigContext& ctx, Rng& rng) {
  try {
    if (v.is_string()) return dataset_from_json(load_relative(v.get<std::string>(), ctx, where));
    Reader r(v, where);
    if (!r.has("generator")) {
      r.raw("inputs");
      r.raw("labels");
      r.has("task");
      r.finish();
      return dataset_from_json(v.dump());
    }
    const auto gen = r.get<std::string>("generator");
    Dataset d;
    if (gen == "separable_2d") {
      const auto n = r.get<std::size_t>("n");
      const double gap = r.get_or("gap", 0.1);
      r.finish();
      d = random_separable_2d(n, gap, rng);
    } else if (gen == "blobs") {
      const auto n = r.get<std::size_t>("n");
      const double sep = r.get_or("separation", 2.0);
      const double sd = r.get_or("std", 0.6);
      r.finish();
      d = gaussian_blobs(n, sep, sd, rng);
    } else if (gen == "sine") {
      const auto n = r.get<std::size_t>("n");
      const auto points = r.get_or<std::string>("points", "chebyshev");
      const auto degree = r.get<std::size_t>("degree");
      const double freq = r.get_or("frequency", 4.0);
      FeatureBasis basis = FeatureBasis::monomial;
      r.read_enum("basis", basis, feature_basis_from_string);
      r.finish();
      Vector xs;
      if (points == "chebyshev")
        xs = chebyshev_nodes(n);
      else if (points == "uniform")
        xs = uniform_grid(n);
      else
        throw ConfigError("field '" + r.path("points") + "' must be \"chebyshev\" or \"uniform\"");
      d = sine_dataset(xs, freq, degree, basis);
    } else {
      throw ConfigError("field '" + r.path("generator") + "' must be one of separable_2d, blobs, sine; got '" +
                        gen + "'");
    }
    return d;
  } catch (const IoError& e) {
    throw ConfigError("field '" + where + "': " + e.what());
  } catch (const DataError& e) {
    throw ConfigError("field '" + where + "': " + e.what());
  } catch (const ExperimentError& e) {
    throw ConfigError("field '" + where + "': " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------

FlowConfig parse_flow_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  FlowConfig c;
  c.seed = resolve_seed(r, ctx);
  // Data first, then weights, both from the same stream.
  Rng rng(c.seed);
  c.data = read_dataset(r.raw("dataset"), "dataset", ctx, rng);
  if (r.has("test_dataset")) c.test = read_dataset(r.raw("test_dataset"), "test_dataset", ctx, rng);
  c.net = read_net(r.raw("net"), "net", ctx, rng);
  r.read_enum("loss", c.loss, loss_kind_from_string);
  c.state.net = c.net;
  r.read("step", c.state.step);
  r.read_enum("integrator", c.state.integrator, integrator_from_string);
  r.read_enum("step_rule", c.state.step_rule, step_rule_from_string);
  r.read("max_step", c.state.max_step);
  r.read("lambdas", c.state.lambdas);
  c.state.rng_seed = rng.next_u64();
  if (!(c.state.step > 0.0)) throw ConfigError("field 'step' must be positive");
  if (!(c.state.max_step > 0.0)) throw ConfigError("field 'max_step' must be positive");
  for (double l : c.state.lambdas)
    if (!(l >= 0.0)) throw ConfigError("field 'lambdas' entries must be ≥ 0");
  if (!c.state.lambdas.empty() && c.state.lambdas.size() != c.net.depth())
    throw ConfigError("field 'lambdas' needs one entry per layer (" + std::to_string(c.net.depth()) + ")");

  if (r.has("stop")) {
    Reader s(r.raw("stop"), "stop");
    s.read_enum("kind", c.stop.kind, stop_kind_from_string);
    s.read("threshold", c.stop.threshold);
    s.read("max_time", c.stop.max_time);
    s.read("max_steps", c.stop.max_steps);
    s.finish();
  }
  if (r.has("record")) {
    Reader s(r.raw("record"), "record");
    s.read("every_steps", c.cadence.every_steps);
    s.read("geometric_ratio", c.cadence.geometric_ratio);
    s.finish();
    if (c.cadence.geometric_ratio != 0.0 && !(c.cadence.geometric_ratio > 1.0))
      throw ConfigError("field 'record.geometric_ratio' must exceed 1");
  }
  r.read("track_svm", c.track_svm);
  r.read("track_null_space", c.track_null_space);
  r.finish();
  try {
    check_compatible(c.loss, c.data);
  } catch (const DataError& e) {
    throw ConfigError(std::string("field 'loss': ") + e.what());
  }
  return c;
}

SpectrumConfig parse_spectrum_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  SpectrumConfig c;
  c.seed = resolve_seed(r, ctx);
  Rng rng(c.seed);
  c.data = read_dataset(r.raw("dataset"), "dataset", ctx, rng);
  c.net = read_net(r.raw("net"), "net", ctx, rng);
  r.read_enum("loss", c.loss, loss_kind_from_string);
  r.read("lambdas", c.lambdas);
  r.read("tol", c.tol);
  r.read("sweep", c.sweep);
  if (r.has("sweep_options")) {
    Reader s(r.raw("sweep_options"), "sweep_options");
    auto& o = c.sweep_options;
    s.read("relax", o.relax);
    s.read("step", o.step);
    s.read("max_flow_steps", o.max_flow_steps);
    s.read("flow_gradient_tol", o.flow_gradient_tol);
    s.read("newton_steps", o.newton_steps);
    s.read("equilibrium_tol", o.equilibrium_tol);
    s.finish();
  }
  c.sweep_options.tol = c.tol;
  r.read("compare_virtual", c.compare_virtual);
  r.finish();
  if (!(c.tol > 0.0)) throw ConfigError("field 'tol' must be positive");
  for (double l : c.sweep)
    if (!(l >= 0.0)) throw ConfigError("field 'sweep' entries must be ≥ 0");
  if (!c.lambdas.empty() && c.lambdas.size() != c.net.depth())
    throw ConfigError("field 'lambdas' needs one entry per layer (" + std::to_string(c.net.depth()) + ")");
  if (c.net.parameter_count() > kMaxHessianDim)
    throw ConfigError("field 'net' has " + std::to_string(c.net.parameter_count()) +
                      " parameters; dense spectra are limited to " + std::to_string(kMaxHessianDim));
  try {
    check_compatible(c.loss, c.data);
  } catch (const DataError& e) {
    throw ConfigError(std::string("field 'loss': ") + e.what());
  }
  return c;
}

SvmConfig parse_svm_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  SvmConfig c;
  c.seed = resolve_seed(r, ctx);
  Rng rng(c.seed);
  c.data = read_dataset(r.raw("dataset"), "dataset", ctx, rng);
  r.finish();
  if (c.data.task != TaskKind::binary) throw ConfigError("field 'dataset' must have binary labels");
  if (c.data.size() > kSvmMaxSamples)
    throw ConfigError("field 'dataset' has " + std::to_string(c.data.size()) + " samples; the oracle handles at most " +
                      std::to_string(kSvmMaxSamples));
  return c;
}

namespace {

void read_sine(Reader& r, SineConfig& c) {
  r.read("train_points", c.train_points);
  r.read("test_points", c.test_points);
  r.read("degree", c.degree);
  r.read("frequency", c.frequency);
  r.read_enum("basis", c.basis, feature_basis_from_string);
  r.read("step", c.step);
  r.read("init_std", c.init_std);
  r.read("noise_std", c.noise_std);
  r.read("per_coordinate", c.per_coordinate);
  r.read("interval", c.interval);
  r.read("cycles", c.cycles);
  r.read("perturbed_cycles", c.perturbed_cycles);
  r.read("repetitions", c.repetitions);
  r.read("reconverge_tolerance", c.reconverge_tolerance);
  r.read("reconverge_budget", c.reconverge_budget);
  r.read("initial_budget", c.initial_budget);
  r.read("train_tolerance", c.train_tolerance);
  r.read("monte_carlo_repetitions", c.monte_carlo_repetitions);
  r.read("random_walk_tolerance", c.random_walk_tolerance);
  r.read("control_steps", c.control_steps);
  r.read("control_record_every", c.control_record_every);
  r.read("flat_norm_tolerance", c.flat_norm_tolerance);
}

void read_toy(Reader& r, ToyNetConfig& c) {
  r.read("train_points", c.train_points);
  r.read("test_points", c.test_points);
  r.read("widths", c.widths);
  r.read_enum("activation", c.activation, activation_kind_from_string);
  r.read_enum("loss", c.loss, loss_kind_from_string);
  r.read("separation", c.separation);
  r.read("blob_std", c.blob_std);
  r.read("step", c.step);
  r.read_enum("step_rule", c.step_rule, step_rule_from_string);
  r.read("max_step", c.max_step);
  r.read("noise_fraction", c.noise_fraction);
  r.read("interval", c.interval);
  r.read("cycles", c.cycles);
  r.read("perturbed_cycles", c.perturbed_cycles);
  r.read("repetitions", c.repetitions);
  r.read("initial_budget", c.initial_budget);
  r.read("reconverge_budget", c.reconverge_budget);
}

}  // namespace

PerturbConfig parse_perturb_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  PerturbConfig c;
  const auto scenario = r.get_or<std::string>("scenario", "sine");
  const std::uint64_t seed = resolve_seed(r, ctx);
  if (scenario == "sine") {
    c.scenario = PerturbConfig::Scenario::sine;
    read_sine(r, c.sine);
    c.sine.seed = seed;
  } else if (scenario == "sine_control") {
    c.scenario = PerturbConfig::Scenario::sine_control;
    c.sine = SineConfig::control();
    read_sine(r, c.sine);
    c.sine.perturb = false;
    c.sine.seed = seed;
  } else if (scenario == "toy_net") {
    c.scenario = PerturbConfig::Scenario::toy_net;
    read_toy(r, c.toy);
    c.toy.seed = seed;
  } else {
    throw ConfigError("field 'scenario' must be one of sine, sine_control, toy_net; got '" + scenario + "'");
  }
  r.finish();
  return c;
}

GrowthConfig parse_growth_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  GrowthConfig c;
  c.seed = resolve_seed(r, ctx);
  r.read("layers", c.layers);
  r.read("f_tilde", c.f_tilde);
  r.read("rho0", c.rho0);
  r.read("t_min", c.t_min);
  r.read("t_max", c.t_max);
  r.read("samples_per_decade", c.samples_per_decade);
  r.read("step", c.step);
  r.read("slope_from", c.slope_from);
  r.read("slope_to", c.slope_to);
  r.read("closed_form_from", c.closed_form_from);
  r.read("closed_form_to", c.closed_form_to);
  r.read("closed_form_tolerance", c.closed_form_tolerance);
  r.read("check_time", c.check_time);
  r.finish();
  return c;
}

SweepConfig parse_sweep_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  SweepConfig c;
  c.seed = resolve_seed(r, ctx);
  r.read("train_points", c.train_points);
  r.read("test_points", c.test_points);
  r.read("min_degree", c.min_degree);
  r.read("max_degree", c.max_degree);
  r.read("frequency", c.frequency);
  r.read_enum("basis", c.basis, feature_basis_from_string);
  r.read("train_tolerance", c.train_tolerance);
  r.read("underfit_threshold", c.underfit_threshold);
  r.read("condition_limit", c.condition_limit);
  r.finish();
  return c;
}

DirectionConfig parse_direction_config(std::string_view text, const ConfigContext& ctx) {
  const json j = parse_json(text);
  Reader r(j, "");
  DirectionConfig c;
  c.seed = resolve_seed(r, ctx);
  r.read("samples", c.samples);
  r.read("gap", c.gap);
  r.read("initializations", c.initializations);
  r.read("init_std", c.init_std);
  r.read("step", c.step);
  r.read("t_max", c.t_max);
  r.read("max_steps", c.max_steps);
  r.read("cosine_tolerance", c.cosine_tolerance);
  r.read("lift_dim", c.lift_dim);
  r.read("square_tolerance", c.square_tolerance);
  r.read("normalized", c.normalized);
  r.read("normalized_steps", c.normalized_steps);
  r.read("unit_tolerance", c.unit_tolerance);
  r.finish();
  return c;
}

std::uint64_t config_hash(std::string_view text) {
  json j = parse_json(text);
  if (j.is_object()) j.erase("seed");
  return fnv1a64(j.dump());
}

}  // namespace gradflow
