// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "gradflow/io.hpp"
#include "gradflow/oracles.hpp"

namespace gradflow {

const char* to_string(FeatureBasis b) { return b == FeatureBasis::monomial ? "monomial" : "chebyshev"; }

FeatureBasis feature_basis_from_string(const std::string& s) {
  if (s == "monomial") return FeatureBasis::monomial;
  if (s == "chebyshev") return FeatureBasis::chebyshev;
  throw ExperimentError("unknown feature basis '" + s + "'");
}

Vector chebyshev_nodes(std::size_t n) {
  Vector x(n);
  for (std::size_t i = 1; i <= n; ++i)
    x[i - 1] = std::cos((2.0 * static_cast<double>(i) - 1.0) * std::numbers::pi /
                        (2.0 * static_cast<double>(n)));
  return x;
}

Vector uniform_grid(std::size_t n) {
  if (n == 1) return {0.0};
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

Vector polynomial_features(double x, std::size_t degree, FeatureBasis basis) {
  Vector phi(degree + 1);
  phi[0] = 1.0;
  if (degree >= 1) phi[1] = x;
  for (std::size_t k = 2; k <= degree; ++k)
    phi[k] = basis == FeatureBasis::monomial ? phi[k - 1] * x : 2.0 * x * phi[k - 1] - phi[k - 2];
  return phi;
}

Dataset sine_dataset(std::span<const double> xs, double frequency, std::size_t degree,
                     FeatureBasis basis) {
  Dataset d;
  d.task = TaskKind::regression;
  for (double x : xs) {
    d.inputs.push_back(polynomial_features(x, degree, basis));
    d.labels.push_back(std::sin(2.0 * std::numbers::pi * frequency * x));
  }
  return d;
}

Dataset gaussian_blobs(std::size_t n, double separation, double stddev, Rng& rng) {
  Dataset d;
  d.task = TaskKind::binary;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = i % 2 == 0 ? 1.0 : -1.0;
    d.inputs.push_back({y * 0.5 * separation + stddev * rng.normal(), stddev * rng.normal()});
    d.labels.push_back(y);
  }
  return d;
}

Dataset random_separable_2d(std::size_t n, double gap, Rng& rng) {
  if (!(gap >= 0.0) || gap >= 1.0) throw ExperimentError("gap must lie in [0, 1)");
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double u0 = std::cos(theta);
  const double u1 = std::sin(theta);
  Dataset d;
  d.task = TaskKind::binary;
  while (d.size() < n) {
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    const double s = u0 * a + u1 * b;
    if (std::fabs(s) < gap) continue;
    d.inputs.push_back({a, b});
    d.labels.push_back(s > 0.0 ? 1.0 : -1.0);
  }
  return d;
}

// ---------------------------------------------------------------------------

bool ScenarioReport::passed() const {
  if (10 * excluded > repetitions) return false;
  return std::all_of(predicates.begin(), predicates.end(), [](const Predicate& p) { return p.passed; });
}

const Predicate* ScenarioReport::predicate(const std::string& name) const {
  for (const auto& p : predicates)
    if (p.name == name) return &p;
  return nullptr;
}

double ScenarioReport::scalar(const std::string& name) const {
  for (const auto& [k, v] : scalars)
    if (k == name) return v;
  throw ExperimentError("report has no scalar '" + name + "'");
}

namespace {

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + '"';
}

std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

}  // namespace

std::string aggregate_json(const ScenarioReport& r, std::uint64_t config_hash) {
  std::string out = "{\"scenario\":" + json_string(r.scenario);
  out += ",\"config_hash\":\"" + hex64(config_hash) + "\"";
  out += ",\"seed\":" + std::to_string(r.seed);
  out += ",\"repetitions\":" + std::to_string(r.repetitions);
  out += ",\"excluded\":" + std::to_string(r.excluded);
  out += std::string(",\"passed\":") + (r.passed() ? "true" : "false");
  out += ",\"predicates\":[";
  for (std::size_t i = 0; i < r.predicates.size(); ++i) {
    const auto& p = r.predicates[i];
    out += (i ? ",{" : "{") + std::string("\"name\":") + json_string(p.name) +
           ",\"passed\":" + (p.passed ? "true" : "false") + ",\"detail\":" + json_string(p.detail) + '}';
  }
  out += "],\"scalars\":{";
  for (std::size_t i = 0; i < r.scalars.size(); ++i)
    out += (i ? "," : "") + json_string(r.scalars[i].first) + ':' + json_number(r.scalars[i].second);
  out += "},\"series\":{";
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    out += (i ? "," : "") + json_string(r.series[i].first) + ":[";
    const auto& v = r.series[i].second;
    for (std::size_t j = 0; j < v.size(); ++j) out += (j ? "," : "") + json_number(v[j]);
    out += ']';
  }
  out += "},\"traces\":[";
  for (std::size_t i = 0; i < r.traces.size(); ++i) {
    out += (i ? ",{" : "{") + std::string("\"file\":") + json_string(r.scenario + "_" + r.traces[i].name + ".csv") +
           ",\"seed\":" + std::to_string(r.traces[i].seed) +
           ",\"flagged\":" + (r.traces[i].flagged ? "true" : "false") + '}';
  }
  return out + "]}\n";
}

std::vector<std::filesystem::path> write_report(const ScenarioReport& r,
                                                const std::filesystem::path& dir,
                                                std::uint64_t config_hash) {
  std::vector<std::filesystem::path> written;
  for (const auto& t : r.traces) {
    auto p = dir / (r.scenario + "_" + t.name + ".csv");
    write_file(p, header_line(config_hash, t.seed) + t.csv);
    written.push_back(std::move(p));
  }
  auto plot = dir / (r.scenario + "_plot.csv");
  write_file(plot, header_line(config_hash, r.seed) + r.plot_csv);
  written.push_back(std::move(plot));
  auto agg = dir / (r.scenario + "_aggregate.json");
  write_file(agg, aggregate_json(r, config_hash));
  written.push_back(std::move(agg));
  return written;
}

namespace {

// Runs fn(i) for i in [0, count) on up to hardware_concurrency threads;
// results are stored by index so the merge order never depends on timing.
template <class R, class Fn>
std::vector<R> map_repetitions(std::size_t count, Fn fn) {
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < count; i += workers) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  std::vector<R> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

// Least-squares slope of y against x.
double ls_slope(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

std::string fmt(double v) { return format_double(v); }

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ExperimentError("config field '" + field + "' " + why);
}

std::string rep_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "rep" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

double min_pairwise_cosine(const std::vector<Vector>& dirs) {
  double worst = 1.0;
  for (std::size_t i = 0; i < dirs.size(); ++i)
    for (std::size_t j = i + 1; j < dirs.size(); ++j) worst = std::min(worst, cosine(dirs[i], dirs[j]));
  return worst;
}

double max_input_norm_sq(const Dataset& d) {
  double m = 0.0;
  for (const auto& x : d.inputs) m = std::max(m, dot(x, x));
  return m;
}

// Mean over repetitions of a per-record quantity, skipping flagged runs.
Vector mean_by_record(const std::vector<TrajectoryTrace>& traces, const std::vector<bool>& flagged,
                      double (*get)(const TrajectoryRecord&, std::size_t), std::size_t arg = 0) {
  std::size_t len = 0;
  for (std::size_t i = 0; i < traces.size(); ++i)
    if (!flagged[i]) len = std::max(len, traces[i].records.size());
  Vector out(len, 0.0);
  Vector cnt(len, 0.0);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (flagged[i]) continue;
    for (std::size_t c = 0; c < traces[i].records.size(); ++c) {
      out[c] += get(traces[i].records[c], arg);
      cnt[c] += 1.0;
    }
  }
  for (std::size_t c = 0; c < len; ++c) out[c] = cnt[c] > 0 ? out[c] / cnt[c] : std::nan("");
  return out;
}

double get_train(const TrajectoryRecord& r, std::size_t) { return r.train_error; }
double get_test(const TrajectoryRecord& r, std::size_t) { return r.test_error; }
double get_norm(const TrajectoryRecord& r, std::size_t k) { return r.layer_norms.at(k); }
double get_null_sq(const TrajectoryRecord& r, std::size_t) { return r.nullspace_norm * r.nullspace_norm; }
double get_time(const TrajectoryRecord& r, std::size_t) { return r.time; }

}  // namespace

// ---------------------------------------------------------------------------

SineConfig SineConfig::control() {
  SineConfig c;
  c.degree = 30;
  c.init_std = 0.1;
  c.perturb = false;
  c.repetitions = 30;
  return c;
}

ScenarioReport sine_polynomial_perturbation(const SineConfig& c) {
  require(c.repetitions >= 1, "repetitions", "must be ≥ 1");
  require(c.train_points >= 1, "train_points", "must be ≥ 1");
  require(c.test_points >= 1, "test_points", "must be ≥ 1");
  require(c.step > 0.0, "step", "must be positive");
  require(c.interval >= 1, "interval", "must be ≥ 1");
  require(!c.perturb || (c.perturbed_cycles >= 1 && c.perturbed_cycles <= c.cycles),
          "perturbed_cycles", "must lie in [1, cycles]");
  require(c.noise_std >= 0.0, "noise_std", "must be ≥ 0");
  require(c.control_record_every >= 1, "control_record_every", "must be ≥ 1");

  const Vector xtr = chebyshev_nodes(c.train_points);
  const Vector xte = uniform_grid(c.test_points);
  const Dataset train = sine_dataset(xtr, c.frequency, c.degree, c.basis);
  const Dataset test = sine_dataset(xte, c.frequency, c.degree, c.basis);
  const std::size_t d = c.degree + 1;
  const double n = static_cast<double>(c.train_points);
  const Matrix x = train.data_matrix();
  const Matrix pnull = null_space_projector(x);
  const std::size_t rank = numerical_rank(x);

  TraceProbe probe;
  probe.test = &test;
  probe.null_projector = pnull;

  struct Rep {
    TrajectoryTrace trace;
    bool flagged = false;
  };
  auto reps = map_repetitions<Rep>(c.repetitions, [&](std::size_t i) {
    Rng rng(c.seed + i);
    Matrix w0(1, d);
    if (c.init_std > 0.0) w0 = rng.normal_matrix(1, d, c.init_std);
    FlowState s;
    s.net = DeepNet({w0}, Activation::linear());
    s.step = c.step / n;
    s.rng_seed = rng.next_u64();
    Rep rep;
    if (!c.perturb) {
      StopRule stop;
      stop.kind = StopRule::Kind::max_time;
      stop.max_steps = c.control_steps;
      RecordCadence cad;
      cad.every_steps = c.control_record_every;
      rep.trace = run_flow(s, LossKind::square, train, stop, cad, probe);
      rep.flagged = !(rep.trace.records.back().train_error <= c.train_tolerance);
      return rep;
    }
    StopRule stop;
    stop.kind = StopRule::Kind::loss_below;
    stop.threshold = c.reconverge_tolerance * n;
    stop.max_steps = c.initial_budget;
    auto init = run_flow(s, LossKind::square, train, stop, {}, probe);
    PerturbationProtocol p;
    p.noise_std = c.noise_std;
    p.scale = NoiseScale::absolute;
    p.per_coordinate = c.per_coordinate;
    p.interval = c.interval;
    p.stop_after = c.perturbed_cycles * c.interval;
    p.repetitions = c.cycles;
    p.reconverge_tolerance = c.reconverge_tolerance;
    p.reconverge_budget = c.reconverge_budget;
    p.early_exit = true;
    rep.trace = perturb_and_reconverge(init.final_state, p, LossKind::square, train, probe);
    rep.flagged = !init.converged || rep.trace.flagged_cycles > 0;
    return rep;
  });

  ScenarioReport r;
  r.scenario = c.perturb ? "sine_perturbation" : "sine_control";
  r.seed = c.seed;
  r.repetitions = c.repetitions;
  std::vector<TrajectoryTrace> traces;
  std::vector<bool> flagged;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    r.traces.push_back({rep_name(i), c.seed + i, trace_csv(reps[i].trace, 1), reps[i].flagged});
    r.excluded += reps[i].flagged ? 1 : 0;
    traces.push_back(std::move(reps[i].trace));
    flagged.push_back(reps[i].flagged);
  }
  const Vector train_err = mean_by_record(traces, flagged, get_train);
  const Vector test_err = mean_by_record(traces, flagged, get_test);
  const Vector norm = mean_by_record(traces, flagged, get_norm, 0);
  const Vector null_sq = mean_by_record(traces, flagged, get_null_sq);
  const Vector times = mean_by_record(traces, flagged, get_time);
  r.series = {{"mean_train_error", train_err},
              {"mean_test_error", test_err},
              {"mean_norm", norm},
              {"mean_nullspace_sq", null_sq}};
  r.plot_csv = c.perturb ? "cycle,mean_train_error,mean_test_error,mean_norm,mean_nullspace_sq\n"
                         : "mean_time,mean_train_error,mean_test_error,mean_norm,mean_nullspace_sq\n";
  for (std::size_t k = 0; k < norm.size(); ++k) {
    r.plot_csv += (c.perturb ? std::to_string(k) : fmt(times[k])) + ',' + fmt(train_err[k]) + ',' +
                  fmt(test_err[k]) + ',' + fmt(norm[k]) + ',' + fmt(null_sq[k]) + '\n';
  }
  r.scalars = {{"rank", static_cast<double>(rank)},
               {"null_dimension", static_cast<double>(d - rank)}};

  // Train error after every cycle, over all repetitions.
  double worst_train = 0.0;
  for (const auto& t : traces)
    for (std::size_t k = 1; k < t.records.size(); ++k) worst_train = std::max(worst_train, t.records[k].train_error);
  r.scalars.emplace_back("worst_train_error", worst_train);

  if (!c.perturb) {
    // Norm change over the second half of the run, relative to the norm.
    double worst = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto& rec = traces[i].records;
      const std::size_t half = rec.size() / 2;
      double lo = rec[half].layer_norms[0];
      double hi = lo;
      for (std::size_t k = half; k < rec.size(); ++k) {
        lo = std::min(lo, rec[k].layer_norms[0]);
        hi = std::max(hi, rec[k].layer_norms[0]);
      }
      worst = std::max(worst, (hi - lo) / std::max(1.0, hi));
    }
    r.scalars.emplace_back("worst_second_half_norm_change", worst);
    double worst_final = 0.0;
    for (const auto& t : traces) worst_final = std::max(worst_final, t.records.back().train_error);
    r.scalars.emplace_back("worst_final_train_error", worst_final);
    r.predicates.push_back({"train_error_converged", worst_final <= c.train_tolerance,
                            "worst final train MSE " + fmt(worst_final)});
    r.predicates.push_back({"norms_flat_after_convergence", worst <= c.flat_norm_tolerance,
                            "worst relative norm change over the second half " + fmt(worst)});
    return r;
  }

  r.predicates.push_back({"train_error_returns", worst_train <= c.train_tolerance,
                          "worst cycle-end train MSE " + fmt(worst_train) + " (limit " +
                              fmt(c.train_tolerance) + ")"});

  bool nondecreasing = true;
  for (std::size_t k = 1; k <= c.perturbed_cycles && k < norm.size(); ++k)
    nondecreasing = nondecreasing && norm[k] >= norm[k - 1];
  r.predicates.push_back({"norm_nondecreasing_while_perturbed", nondecreasing,
                          "mean ‖w‖ from " + fmt(norm.front()) + " to " +
                              fmt(norm[std::min(c.perturbed_cycles, norm.size() - 1)])});

  // Monte Carlo random walk of the null-space component, no flow involved.
  const std::size_t m = c.perturbed_cycles;
  Vector mc(c.monte_carlo_repetitions);
  for (std::size_t j = 0; j < c.monte_carlo_repetitions; ++j) {
    Rng rng(c.seed + c.repetitions + j);
    std::vector<Matrix> w{Matrix(1, d)};
    if (c.init_std > 0.0) w[0] = rng.normal_matrix(1, d, c.init_std);
    PerturbationProtocol p;
    p.noise_std = c.noise_std;
    p.per_coordinate = c.per_coordinate;
    for (std::size_t k = 0; k < m; ++k) perturb_layers(w, p, rng);
    const double v = norm2(matvec(pnull, w[0].data()));
    mc[j] = v * v;
  }
  const double mc_mean = mean(mc);
  const double observed = null_sq.size() > m ? null_sq[m] : std::nan("");
  const double nd = static_cast<double>(d - rank);
  const double analytic = c.per_coordinate
                              ? (static_cast<double>(m) * c.noise_std * c.noise_std + c.init_std * c.init_std) * nd
                              : std::nan("");
  r.scalars.emplace_back("nullspace_sq_observed", observed);
  r.scalars.emplace_back("nullspace_sq_monte_carlo", mc_mean);
  r.scalars.emplace_back("nullspace_sq_analytic", analytic);
  const double rel = std::fabs(observed - mc_mean) / mc_mean;
  r.predicates.push_back({"nullspace_random_walk", rel <= c.random_walk_tolerance,
                          "observed " + fmt(observed) + " vs Monte Carlo " + fmt(mc_mean) +
                              " (relative gap " + fmt(rel) + ")"});

  double drift = 0.0;
  for (std::size_t k = m + 1; k < null_sq.size(); ++k)
    drift = std::max(drift, std::fabs(null_sq[k] - null_sq[m]) / std::max(1.0, null_sq[m]));
  r.predicates.push_back({"nullspace_frozen_after_perturbations", drift <= 1e-8,
                          "largest relative change " + fmt(drift)});
  return r;
}

// ---------------------------------------------------------------------------

ScenarioReport min_norm_degree_sweep(const SweepConfig& c) {
  require(c.train_points >= 1, "train_points", "must be ≥ 1");
  require(c.test_points >= 1, "test_points", "must be ≥ 1");
  require(c.min_degree <= c.max_degree, "min_degree", "must not exceed max_degree");

  const Vector xtr = chebyshev_nodes(c.train_points);
  const Vector xte = uniform_grid(c.test_points);
  auto mse = [](const Matrix& x, std::span<const double> w, std::span<const double> y) {
    const Vector f = matvec(x, w);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (f[i] - y[i]) * (f[i] - y[i]);
    return s / static_cast<double>(f.size());
  };

  ScenarioReport r;
  r.scenario = "degree_sweep";
  r.seed = c.seed;
  r.repetitions = 1;
  std::string csv = "degree,train_loss,test_loss,rank,gram_condition,ill_conditioned\n";
  Vector degrees, train_loss, test_loss;
  std::size_t flagged = 0;
  for (std::size_t deg = c.min_degree; deg <= c.max_degree; ++deg) {
    const Dataset tr = sine_dataset(xtr, c.frequency, deg, c.basis);
    const Dataset te = sine_dataset(xte, c.frequency, deg, c.basis);
    const Matrix x = tr.data_matrix();
    const auto sol = min_norm_solve(x, tr.labels);
    const double trl = mse(x, sol.w, tr.labels);
    const double tel = mse(te.data_matrix(), sol.w, te.labels);
    const bool ill = !(sol.gram_condition <= c.condition_limit);
    flagged += ill ? 1 : 0;
    csv += std::to_string(deg) + ',' + fmt(trl) + ',' + fmt(tel) + ',' + std::to_string(sol.rank) +
           ',' + fmt(sol.gram_condition) + ',' + (ill ? "1" : "0") + '\n';
    degrees.push_back(static_cast<double>(deg));
    train_loss.push_back(trl);
    test_loss.push_back(tel);
  }
  r.traces.push_back({"curve", c.seed, csv, false});
  r.plot_csv = "degree,train_loss,test_loss\n";
  for (std::size_t i = 0; i < degrees.size(); ++i)
    r.plot_csv += fmt(degrees[i]) + ',' + fmt(train_loss[i]) + ',' + fmt(test_loss[i]) + '\n';
  r.series = {{"degree", degrees}, {"train_loss", train_loss}, {"test_loss", test_loss}};
  r.scalars.emplace_back("ill_conditioned_degrees", static_cast<double>(flagged));

  double worst_interp = 0.0;
  bool any_interp = false;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (degrees[i] >= static_cast<double>(c.train_points)) {
      any_interp = true;
      worst_interp = std::max(worst_interp, train_loss[i]);
    }
  }
  r.scalars.emplace_back("worst_train_loss_past_threshold", worst_interp);
  r.predicates.push_back({"interpolation_past_threshold", any_interp && worst_interp <= c.train_tolerance,
                          "worst train MSE for degree ≥ " + std::to_string(c.train_points) + ": " +
                              fmt(worst_interp)});

  if (c.min_degree <= 1) {
    r.predicates.push_back({"underfit_at_low_degree", train_loss.front() >= c.underfit_threshold,
                            "degree " + std::to_string(c.min_degree) + " train MSE " + fmt(train_loss.front())});
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i + 1 < test_loss.size(); ++i)
    if (test_loss[i] < test_loss[best]) best = i;
  r.scalars.emplace_back("best_degree", degrees[best]);
  r.scalars.emplace_back("best_test_loss", test_loss[best]);
  r.scalars.emplace_back("final_test_loss", test_loss.back());
  r.predicates.push_back({"overfitting_onset", test_loss.size() >= 2 && test_loss.back() > test_loss[best],
                          "test MSE at degree " + fmt(degrees.back()) + " is " + fmt(test_loss.back()) +
                              ", best " + fmt(test_loss[best]) + " at degree " + fmt(degrees[best])});
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// Exponential and logistic losses below these values imply yₙf(xₙ) > 0 for
// every sample; so does softmax cross entropy below log 2.
double zero_error_loss(LossKind kind) {
  switch (kind) {
    case LossKind::exponential:
      return 1.0;
    case LossKind::logistic:
    case LossKind::softmax_cross_entropy:
      return std::log(2.0);
    case LossKind::square:
      break;
  }
  throw ExperimentError("config field 'loss' must be a classification loss");
}

}  // namespace

ScenarioReport toy_deepnet_perturbation(const ToyNetConfig& c) {
  require(c.repetitions >= 1, "repetitions", "must be ≥ 1");
  require(c.widths.size() >= 2 && c.widths.back() == 1, "widths", "must end in a single output");
  require(c.interval >= 1, "interval", "must be ≥ 1");
  require(c.step > 0.0, "step", "must be positive");
  require(c.max_step > 0.0, "max_step", "must be positive");
  require(c.perturbed_cycles >= 1 && c.perturbed_cycles <= c.cycles, "perturbed_cycles",
          "must lie in [1, cycles]");
  require(c.loss != LossKind::softmax_cross_entropy, "loss", "must be exponential or logistic");
  const double target = zero_error_loss(c.loss);

  Rng data_rng(c.seed);
  const Dataset train = gaussian_blobs(c.train_points, c.separation, c.blob_std, data_rng);
  const Dataset test = gaussian_blobs(c.test_points, c.separation, c.blob_std, data_rng);
  const std::size_t depth = c.widths.size() - 1;
  TraceProbe probe;
  probe.test = &test;

  struct Rep {
    TrajectoryTrace perturbed;
    TrajectoryTrace control;
    bool flagged = false;
  };
  Activation act;
  act.kind = c.activation;
  auto reps = map_repetitions<Rep>(c.repetitions, [&](std::size_t i) {
    Rng rng(c.seed + i);
    FlowState s;
    s.net = DeepNet::random(c.widths, act, rng);
    s.step = c.step;
    s.step_rule = c.step_rule;
    s.max_step = c.max_step;
    s.rng_seed = rng.next_u64();
    StopRule stop;
    stop.kind = StopRule::Kind::loss_below;
    stop.threshold = target;
    stop.max_steps = c.initial_budget;
    const auto init = run_flow(s, c.loss, train, stop, {}, probe);
    Rep rep;
    PerturbationProtocol p;
    p.noise_std = c.noise_fraction;
    p.scale = NoiseScale::relative_to_layer_std;
    p.interval = c.interval;
    p.stop_after = c.perturbed_cycles * c.interval;
    p.repetitions = c.cycles;
    p.reconverge_budget = c.reconverge_budget;
    rep.perturbed = perturb_and_reconverge(init.final_state, p, c.loss, train, probe);

    StopRule plain;
    plain.kind = StopRule::Kind::max_time;
    plain.max_steps = c.cycles * c.interval;
    RecordCadence cad;
    cad.every_steps = c.interval;
    rep.control = run_flow(init.final_state, c.loss, train, plain, cad, probe);
    rep.flagged = !init.converged || rep.perturbed.flagged_cycles > 0;
    return rep;
  });

  ScenarioReport r;
  r.scenario = "toy_deepnet";
  r.seed = c.seed;
  r.repetitions = c.repetitions;
  std::vector<TrajectoryTrace> pert, ctrl;
  std::vector<bool> flagged;
  double worst_train = 0.0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    r.traces.push_back({rep_name(i), c.seed + i, trace_csv(reps[i].perturbed, depth), reps[i].flagged});
    r.traces.push_back({rep_name(i) + "_control", c.seed + i, trace_csv(reps[i].control, depth), reps[i].flagged});
    r.excluded += reps[i].flagged ? 1 : 0;
    for (std::size_t k = 1; k < reps[i].perturbed.records.size(); ++k)
      worst_train = std::max(worst_train, reps[i].perturbed.records[k].train_error);
    pert.push_back(std::move(reps[i].perturbed));
    ctrl.push_back(std::move(reps[i].control));
    flagged.push_back(reps[i].flagged);
  }

  const Vector test_err = mean_by_record(pert, flagged, get_test);
  const Vector train_err = mean_by_record(pert, flagged, get_train);
  std::vector<Vector> norms, control_norms;
  for (std::size_t k = 0; k < depth; ++k) {
    norms.push_back(mean_by_record(pert, flagged, get_norm, k));
    control_norms.push_back(mean_by_record(ctrl, flagged, get_norm, k));
  }
  r.series = {{"mean_train_error", train_err}, {"mean_test_error", test_err}};
  for (std::size_t k = 0; k < depth; ++k) {
    r.series.emplace_back("mean_norm_l" + std::to_string(k + 1), norms[k]);
    r.series.emplace_back("control_mean_norm_l" + std::to_string(k + 1), control_norms[k]);
  }
  r.plot_csv = "cycle,mean_train_error,mean_test_error";
  for (std::size_t k = 1; k <= depth; ++k)
    r.plot_csv += ",mean_norm_l" + std::to_string(k) + ",control_mean_norm_l" + std::to_string(k);
  r.plot_csv += '\n';
  for (std::size_t cyc = 0; cyc < train_err.size(); ++cyc) {
    r.plot_csv += std::to_string(cyc) + ',' + fmt(train_err[cyc]) + ',' + fmt(test_err[cyc]);
    for (std::size_t k = 0; k < depth; ++k)
      r.plot_csv += ',' + fmt(norms[k][cyc]) + ',' +
                    fmt(cyc < control_norms[k].size() ? control_norms[k][cyc] : std::nan(""));
    r.plot_csv += '\n';
  }

  r.predicates.push_back({"train_error_returns", worst_train == 0.0,
                          "worst cycle-end train error " + fmt(worst_train)});

  const std::size_t m = std::min(c.perturbed_cycles, train_err.size() - 1);
  bool increasing = true;
  std::string detail;
  for (std::size_t k = 0; k < depth; ++k) {
    for (std::size_t cyc = 1; cyc <= m; ++cyc) {
      if (!(norms[k][cyc] > norms[k][cyc - 1])) {
        increasing = false;
        detail += "layer " + std::to_string(k + 1) + " cycle " + std::to_string(cyc) + "; ";
      }
    }
  }
  r.predicates.push_back({"layer_norms_increase_each_cycle", increasing,
                          increasing ? "mean per-layer norms rise after every perturbation"
                                     : "no increase at " + detail});

  Vector cyc_idx, risk;
  for (std::size_t cyc = 0; cyc <= m; ++cyc) {
    cyc_idx.push_back(static_cast<double>(cyc));
    risk.push_back(test_err[cyc]);
  }
  const double slope = ls_slope(cyc_idx, risk);
  r.scalars.emplace_back("test_error_slope_per_cycle", slope);
  r.predicates.push_back({"test_risk_trend_nondecreasing", slope >= 0.0,
                          "least-squares slope of mean test error " + fmt(slope)});

  bool slower = true;
  bool control_grows = true;
  for (std::size_t k = 0; k < depth; ++k) {
    const double gp = norms[k][m] - norms[k][0];
    const double gc = control_norms[k][std::min(m, control_norms[k].size() - 1)] - control_norms[k][0];
    slower = slower && gc < gp;
    for (std::size_t cyc = 1; cyc < control_norms[k].size(); ++cyc)
      control_grows = control_grows && control_norms[k][cyc] >= control_norms[k][cyc - 1];
    r.scalars.emplace_back("norm_growth_l" + std::to_string(k + 1), gp);
    r.scalars.emplace_back("control_norm_growth_l" + std::to_string(k + 1), gc);
  }
  r.predicates.push_back({"control_norms_grow_slower", slower && control_grows,
                          "unperturbed norms nondecreasing and below the perturbed growth"});
  return r;
}

// ---------------------------------------------------------------------------

ScenarioReport growth_asymptotics(const GrowthConfig& c) {
  require(!c.layers.empty(), "layers", "must list at least one depth");
  require(c.f_tilde > 0.0, "f_tilde", "must be positive");
  require(c.rho0 > 0.0, "rho0", "must be positive");
  require(c.t_min > 0.0 && c.t_max > c.t_min, "t_max", "must exceed t_min > 0");
  require(c.samples_per_decade >= 1, "samples_per_decade", "must be ≥ 1");
  require(c.step > 0.0, "step", "must be positive");

  // Geometric grid; exact powers of ten land on the grid.
  Vector times;
  const double lo = std::log10(c.t_min);
  const double hi = std::log10(c.t_max);
  const auto total = static_cast<std::size_t>(std::ceil((hi - lo) * static_cast<double>(c.samples_per_decade)));
  for (std::size_t i = 0; i <= total; ++i) {
    const double e = lo + static_cast<double>(i) / static_cast<double>(c.samples_per_decade);
    const double rounded = std::round(e);
    times.push_back(std::fabs(e - rounded) < 1e-9 ? std::pow(10.0, rounded) : std::pow(10.0, e));
  }
  times.back() = std::min(times.back(), c.t_max);
  for (double special : {c.check_time, c.slope_from, c.slope_to}) {
    if (special >= c.t_min && special <= c.t_max &&
        std::find(times.begin(), times.end(), special) == times.end())
      times.push_back(special);
  }
  std::sort(times.begin(), times.end());

  ScenarioReport r;
  r.scenario = "growth";
  r.seed = c.seed;
  r.repetitions = c.layers.size();
  r.plot_csv = "layers,time,log_t,rho,product,closed_form_rho\n";

  struct PerK {
    int k;
    GrowthRun run;
  };
  std::vector<PerK> runs;
  for (int k : c.layers) {
    require(k >= 1, "layers", "entries must be ≥ 1");
    runs.push_back({k, integrate_equal_scale_growth(k, c.f_tilde, c.rho0, times, c.step)});
  }

  auto at = [&](const GrowthRun& run, double t) -> const GrowthSample& {
    for (const auto& s : run.samples)
      if (s.time == t) return s;
    throw ExperimentError("growth grid is missing t=" + fmt(t));
  };

  std::size_t halvings = 0;
  for (const auto& [k, run] : runs) {
    halvings += run.step_halvings;
    std::optional<double> constant;
    if (k <= 2) constant = growth_constant(k, c.f_tilde, c.rho0);
    std::string csv = "time,log_t,";
    for (int l = 1; l <= k; ++l) csv += "rho_l" + std::to_string(l) + ',';
    csv += "product,closed_form_rho\n";
    for (const auto& s : run.samples) {
      const double cf = constant ? growth_closed_form(k, c.f_tilde, s.time, *constant) : std::nan("");
      csv += fmt(s.time) + ',' + fmt(std::log(s.time)) + ',';
      for (int l = 0; l < k; ++l) csv += fmt(s.rhos[0]) + ',';
      csv += fmt(s.product) + ',' + fmt(cf) + '\n';
      r.plot_csv += std::to_string(k) + ',' + fmt(s.time) + ',' + fmt(std::log(s.time)) + ',' +
                    fmt(s.rhos[0]) + ',' + fmt(s.product) + ',' + fmt(cf) + '\n';
    }
    r.traces.push_back({"k" + std::to_string(k), c.seed, csv, false});

    if (k == 1) {
      Vector lt, rho;
      for (const auto& s : run.samples) {
        if (s.time >= c.slope_from && s.time <= c.slope_to) {
          lt.push_back(std::log(s.time));
          rho.push_back(s.rhos[0]);
        }
      }
      const double slope = lt.size() >= 2 ? ls_slope(lt, rho) : std::nan("");
      r.scalars.emplace_back("k1_slope", slope);
      r.predicates.push_back({"k1_slope_near_one", slope >= 0.95 && slope <= 1.05,
                              "slope of ρ against log t on [" + fmt(c.slope_from) + ", " +
                                  fmt(c.slope_to) + "] is " + fmt(slope)});
    }
    if (k == 2) {
      double worst = 0.0;
      for (const auto& s : run.samples) {
        if (s.time < c.closed_form_from || s.time > c.closed_form_to) continue;
        const double cf = growth_closed_form(2, c.f_tilde, s.time, *constant);
        worst = std::max(worst, std::fabs(s.rhos[0] - cf) / cf);
      }
      r.scalars.emplace_back("k2_closed_form_rel_err", worst);
      r.predicates.push_back({"k2_matches_closed_form", worst <= c.closed_form_tolerance,
                              "largest relative gap to the li⁻¹ form " + fmt(worst)});
    }
    if (k >= 2) {
      // Πρ outgrowing log t shows up in the excess Πρ − log t; the ratio
      // Πρ/log t itself tends to 1/f̃ from above.
      bool excess_up = true;
      bool layer_down = true;
      double prev_e = -std::numeric_limits<double>::infinity();
      double prev_l = std::numeric_limits<double>::infinity();
      double ratio_from = std::nan("");
      double ratio_to = std::nan("");
      for (const auto& s : run.samples) {
        if (s.time < c.slope_from || s.time <= 1.0) continue;
        const double lt = std::log(s.time);
        const double ex = s.product - lt / c.f_tilde;
        const double lr = s.rhos[0] / lt;
        excess_up = excess_up && ex > prev_e;
        layer_down = layer_down && lr < prev_l;
        prev_e = ex;
        prev_l = lr;
        if (std::isnan(ratio_from)) ratio_from = s.product / lt;
        ratio_to = s.product / lt;
      }
      const auto& s = at(run, c.check_time);
      const double lt = std::log(c.check_time);
      const std::string tag = "k" + std::to_string(k);
      r.scalars.emplace_back(tag + "_product_at_check", s.product);
      r.scalars.emplace_back(tag + "_rho_at_check", s.rhos[0]);
      r.scalars.emplace_back(tag + "_product_over_log_first", ratio_from);
      r.scalars.emplace_back(tag + "_product_over_log_last", ratio_to);
      r.predicates.push_back({tag + "_product_outgrows_log", excess_up,
                              "Πρ − log t/f̃ increasing for t ≥ " + fmt(c.slope_from)});
      r.predicates.push_back({tag + "_rho_over_log_decreasing", layer_down,
                              "ρ/log t for t ≥ " + fmt(c.slope_from)});
      r.predicates.push_back({tag + "_orderings_at_check", s.product > lt && s.rhos[0] < lt,
                              "at t=" + fmt(c.check_time) + ": Πρ=" + fmt(s.product) + ", ρ=" +
                                  fmt(s.rhos[0]) + ", log t=" + fmt(lt)});

      // The coupled per-layer system with equal scales runs the same law at
      // 1/K of the speed.
      Vector scaled;
      for (double t : times) scaled.push_back(static_cast<double>(k) * t);
      const auto coupled = integrate_coupled_scale_growth(Vector(static_cast<std::size_t>(k), c.rho0),
                                                          c.f_tilde, scaled, c.step);
      double gap = 0.0;
      for (std::size_t i = 0; i < times.size(); ++i)
        gap = std::max(gap, std::fabs(coupled.samples[i].product - run.samples[i].product) /
                                run.samples[i].product);
      r.scalars.emplace_back(tag + "_coupled_rel_gap", gap);
      r.predicates.push_back({tag + "_coupled_matches_rescaled", gap <= 1e-6,
                              "coupled ρ-system at K·t vs equal-scale law at t: " + fmt(gap)});
    }
  }
  r.scalars.emplace_back("step_halvings", static_cast<double>(halvings));

  const PerK* k2 = nullptr;
  const PerK* k4 = nullptr;
  for (const auto& p : runs) {
    if (p.k == 2) k2 = &p;
    if (p.k == 4) k4 = &p;
  }
  if (k2 && k4) {
    const double p2 = at(k2->run, c.check_time).product;
    const double p4 = at(k4->run, c.check_time).product;
    r.predicates.push_back({"k4_product_exceeds_k2", p4 > p2,
                            "at t=" + fmt(c.check_time) + ": K=4 " + fmt(p4) + ", K=2 " + fmt(p2)});
  }
  return r;
}

// ---------------------------------------------------------------------------

ScenarioReport convergence_direction_study(const DirectionConfig& c) {
  require(c.samples >= 1 && c.samples <= kSvmMaxSamples, "samples",
          "must lie in [1, " + std::to_string(kSvmMaxSamples) + "]");
  require(c.initializations >= 1, "initializations", "must be ≥ 1");
  require(c.step > 0.0, "step", "must be positive");
  require(c.lift_dim >= 3, "lift_dim", "must be ≥ 3");

  ScenarioReport r;
  r.scenario = "direction";
  r.seed = c.seed;
  r.repetitions = c.initializations;

  // Dataset from the base stream; regenerate if the oracle finds it
  // non-separable.
  Rng data_rng(c.seed);
  Dataset data;
  SvmResult svm;
  std::size_t regenerated = 0;
  while (true) {
    data = random_separable_2d(c.samples, c.gap, data_rng);
    svm = hard_margin_svm(data);
    if (svm.separable()) break;
    if (++regenerated > 100) throw ExperimentError("could not draw a separable dataset");
  }
  const auto& sol = *svm.solution;
  r.scalars.emplace_back("regenerated_datasets", static_cast<double>(regenerated));
  r.scalars.emplace_back("svm_margin", sol.margin);

  const double eta = c.step / max_input_norm_sq(data);
  TraceProbe probe;
  probe.reference_direction = sol.w_tilde;
  probe.log_direction = sol.w_raw;

  struct Rep {
    TrajectoryTrace trace;
    Vector final_dir;
    Vector separated_w;  // first state with zero training error
  };
  auto reps = map_repetitions<Rep>(c.initializations, [&](std::size_t i) {
    Rng rng(c.seed + 1 + i);
    FlowState s;
    s.net = DeepNet({rng.normal_matrix(1, 2, c.init_std)}, Activation::linear());
    s.step = eta;
    s.step_rule = StepRule::inverse_loss;
    StopRule sep;
    sep.kind = StopRule::Kind::loss_below;
    sep.threshold = 1.0;
    sep.max_steps = c.max_steps;
    const auto pre = run_flow(s, LossKind::exponential, data, sep);
    StopRule stop;
    stop.kind = StopRule::Kind::max_time;
    stop.max_time = c.t_max;
    stop.max_steps = c.max_steps;
    RecordCadence cad;
    cad.geometric_ratio = 10.0;
    Rep rep;
    rep.trace = run_flow(s, LossKind::exponential, data, stop, cad, probe);
    rep.final_dir = flatten(rep.trace.final_state.net);
    rep.separated_w = flatten(pre.final_state.net);
    return rep;
  });

  std::vector<Vector> dirs;
  double worst_svm = 1.0;
  r.plot_csv = "init,time,margin_cosine,residual_norm\n";
  for (std::size_t i = 0; i < reps.size(); ++i) {
    r.traces.push_back({"init" + std::to_string(i), c.seed + 1 + i, trace_csv(reps[i].trace, 1), false});
    for (const auto& rec : reps[i].trace.records)
      r.plot_csv += std::to_string(i) + ',' + fmt(rec.time) + ',' + fmt(rec.margin_cosine) + ',' +
                    fmt(rec.residual_norm) + '\n';
    worst_svm = std::min(worst_svm, cosine(reps[i].final_dir, sol.w_tilde));
    dirs.push_back(reps[i].final_dir);
  }
  const double pairwise = min_pairwise_cosine(dirs);
  r.scalars.emplace_back("min_cosine_to_svm", worst_svm);
  r.scalars.emplace_back("min_pairwise_cosine", pairwise);
  r.predicates.push_back({"exponential_matches_svm", worst_svm >= c.cosine_tolerance,
                          "smallest cosine to the oracle direction " + fmt(worst_svm)});
  r.predicates.push_back({"exponential_init_independent", pairwise >= c.cosine_tolerance,
                          "smallest pairwise cosine " + fmt(pairwise)});

  // Square-loss contrast on lifted inputs x′ = Ax, which have a null space.
  {
    Rng rng(c.seed + 1 + c.initializations);
    const Matrix a = rng.normal_matrix(c.lift_dim, 2);
    Dataset lifted;
    lifted.task = TaskKind::regression;
    for (std::size_t n = 0; n < data.size(); ++n) {
      lifted.inputs.push_back(matvec(a, data.inputs[n]));
      lifted.labels.push_back(data.labels[n]);
    }
    const Matrix x = lifted.data_matrix();
    const Vector wmn = min_norm_least_squares(x, lifted.labels);
    const Matrix pnull = null_space_projector(x);
    Matrix gram = matmul(x.transpose(), x);
    gram *= 2.0;
    const double lmax = symmetric_eig(gram).eigenvalues.front();
    auto run_square = [&](const Vector& w0) {
      FlowState s;
      s.net = DeepNet({Matrix(1, c.lift_dim, w0)}, Activation::linear());
      s.step = 1.0 / lmax;
      StopRule stop;
      stop.kind = StopRule::Kind::gradient_norm_below;
      stop.threshold = 1e-13;
      stop.max_steps = 2'000'000;
      return flatten(run_flow(s, LossKind::square, lifted, stop).final_state.net);
    };
    const Vector from_zero = run_square(Vector(c.lift_dim, 0.0));
    const Vector c0 = rng.normal_vector(c.lift_dim);
    const Vector from_c = run_square(c0);
    const Vector pc = matvec(pnull, c0);
    Vector diff0(c.lift_dim), diffc(c.lift_dim);
    for (std::size_t j = 0; j < c.lift_dim; ++j) {
      diff0[j] = from_zero[j] - wmn[j];
      diffc[j] = from_c[j] - (wmn[j] + pc[j]);
    }
    const double e0 = norm2(diff0);
    const double ec = norm2(diffc);
    r.scalars.emplace_back("square_zero_init_error", e0);
    r.scalars.emplace_back("square_null_init_error", ec);
    r.scalars.emplace_back("square_null_component_norm", norm2(pc));
    r.predicates.push_back({"square_zero_init_is_min_norm", e0 <= c.square_tolerance,
                            "‖w − w_min-norm‖ = " + fmt(e0)});
    r.predicates.push_back({"square_keeps_null_component", ec <= c.square_tolerance && norm2(pc) > 1e-3,
                            "‖w − (w_min-norm + P_null c)‖ = " + fmt(ec) + " with ‖P_null c‖ = " +
                                fmt(norm2(pc))});
  }

  if (!c.normalized) return r;

  // Scale/direction system on the one-layer linear model.
  std::vector<Vector> vdirs;
  double worst_unit = 0.0;
  bool rho_increasing = true;
  bool increments_vanish = true;
  double worst_rate_ratio = 0.0;
  for (std::size_t i = 0; i < c.initializations; ++i) {
    // Started from the first separated state so that every ρ̇ is positive.
    const DeepNet net({Matrix(1, 2, reps[i].separated_w)}, Activation::linear());
    auto s = make_normalized_state(net, eta, PenaltyMode::constraint);
    s.step_rule = StepRule::inverse_loss;
    // ρ̇ is measured as increment over elapsed time, since the loss-scaled
    // step itself grows.
    double first_rate = -1.0;
    double last_rate = 0.0;
    for (std::size_t step = 0; step < c.normalized_steps; ++step) {
      const double before = s.rhos[0];
      const double t_before = s.time;
      s = normalized_flow_step(s, data);
      rho_increasing = rho_increasing && s.rhos[0] > before;
      last_rate = (s.rhos[0] - before) / (s.time - t_before);
      if (first_rate < 0.0) first_rate = last_rate;
      worst_unit = std::max(worst_unit, std::fabs(frobenius_norm(s.vs.layer(0)) - 1.0));
    }
    increments_vanish = increments_vanish && first_rate > 0.0 && last_rate < 1e-2 * first_rate;
    worst_rate_ratio = std::max(worst_rate_ratio, last_rate / first_rate);
    vdirs.push_back(flatten(s.vs));
  }
  double worst_v = 1.0;
  for (const auto& v : vdirs) worst_v = std::min(worst_v, cosine(v, sol.w_tilde));
  const double v_pairwise = min_pairwise_cosine(vdirs);
  r.scalars.emplace_back("normalized_worst_unit_error", worst_unit);
  r.scalars.emplace_back("normalized_min_cosine_to_svm", worst_v);
  r.scalars.emplace_back("normalized_min_pairwise_cosine", v_pairwise);
  r.predicates.push_back({"normalized_unit_norm", worst_unit <= c.unit_tolerance,
                          "largest |‖V‖ − 1| " + fmt(worst_unit)});
  r.predicates.push_back({"normalized_rho_increasing", rho_increasing, "ρ strictly increasing once separated"});
  r.scalars.emplace_back("normalized_rho_rate_last_over_first", worst_rate_ratio);
  r.predicates.push_back({"normalized_rho_increments_vanish", increments_vanish,
                          "largest final/initial ρ̇ ratio " + fmt(worst_rate_ratio) + " (limit 0.01)"});
  r.predicates.push_back({"normalized_matches_svm", worst_v >= c.cosine_tolerance,
                          "smallest cosine of V to the oracle direction " + fmt(worst_v)});
  r.predicates.push_back({"normalized_init_independent", v_pairwise >= c.cosine_tolerance,
                          "smallest pairwise cosine of V " + fmt(v_pairwise)});

  // One-layer (‖w‖, w̃) flow from the first separated state of each plain run.
  double worst_proj = 0.0;
  double worst_unit_w = 0.0;
  double worst_drift = 0.0;
  bool rate_positive = true;
  double worst_match = 1.0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    RecordCadence cad;
    cad.every_steps = 1;
    const auto dt = normalized_direction_flow(reps[i].separated_w, data, eta, StepRule::inverse_loss,
                                              c.t_max, c.max_steps, cad);
    for (const auto& rec : dt.records) {
      worst_proj = std::max(worst_proj, rec.projector_residual);
      worst_unit_w = std::max(worst_unit_w, rec.unit_error);
      worst_drift = std::max(worst_drift, rec.euler_drift);
      rate_positive = rate_positive && rec.norm_rate > 0.0;
    }
    worst_match = std::min(worst_match, cosine(dt.final_state.direction, reps[i].final_dir));
  }
  r.scalars.emplace_back("direction_flow_projector_residual", worst_proj);
  r.scalars.emplace_back("direction_flow_unit_error", worst_unit_w);
  r.scalars.emplace_back("direction_flow_euler_drift", worst_drift);
  r.scalars.emplace_back("direction_flow_min_cosine_to_plain", worst_match);
  r.predicates.push_back({"direction_flow_projector_identity", worst_proj <= 1e-10,
                          "largest ‖S·w̃‖ " + fmt(worst_proj)});
  r.predicates.push_back({"direction_flow_unit", worst_unit_w <= 1e-8,
                          "largest |‖w̃‖ − 1| along the trajectory " + fmt(worst_unit_w)});
  r.predicates.push_back({"direction_flow_norm_rate_positive", rate_positive, "d‖w‖/dt > 0 at every step"});
  r.predicates.push_back({"direction_flow_matches_plain", worst_match >= c.cosine_tolerance,
                          "smallest cosine of the w̃ limit to the plain-flow direction " + fmt(worst_match)});
  return r;
}

}  // namespace gradflow
