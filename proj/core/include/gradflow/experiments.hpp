// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale scenarios. Each returns a ScenarioReport whose predicates are
// evaluated mechanically from the traces. Repetition i draws everything from
// its own stream seeded with seed + i, and results are merged in index order,
// so a report depends only on (config, seed).

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradflow/flow.hpp"
#include "gradflow/linalg.hpp"
#include "gradflow/losses.hpp"
#include "gradflow/network.hpp"
#include "gradflow/random.hpp"

namespace gradflow {

class ExperimentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Data generators.

enum class FeatureBasis { monomial, chebyshev };

const char* to_string(FeatureBasis b);
FeatureBasis feature_basis_from_string(const std::string& s);

// xᵢ = cos((2i−1)π/2n), i = 1..n.
Vector chebyshev_nodes(std::size_t n);
// n evenly spaced points on [−1, 1].
Vector uniform_grid(std::size_t n);
// [φ₀(x), …, φ_deg(x)] with φ_k = x^k or the Chebyshev polynomial T_k.
Vector polynomial_features(double x, std::size_t degree, FeatureBasis basis);
// Regression data for sin(2π·frequency·x) on the given points.
Dataset sine_dataset(std::span<const double> xs, double frequency, std::size_t degree,
                     FeatureBasis basis);

// Two Gaussian blobs centred at (±separation/2, 0), labels ±1.
Dataset gaussian_blobs(std::size_t n, double separation, double stddev, Rng& rng);

// Points uniform in [−1,1]² labelled by a random line through the origin;
// points closer than gap to the line are redrawn.
Dataset random_separable_2d(std::size_t n, double gap, Rng& rng);

// ---------------------------------------------------------------------------
// Reports.

struct Predicate {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RepetitionTrace {
  std::string name;  // file stem
  std::uint64_t seed = 0;
  std::string csv;   // without the header comment line
  bool flagged = false;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t repetitions = 0;
  std::size_t excluded = 0;
  std::vector<RepetitionTrace> traces;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::pair<std::string, Vector>> series;
  std::string plot_csv;
  std::vector<Predicate> predicates;

  // All predicates hold and at most 10% of repetitions were excluded.
  bool passed() const;
  const Predicate* predicate(const std::string& name) const;
  double scalar(const std::string& name) const;
};

std::string aggregate_json(const ScenarioReport& report, std::uint64_t config_hash);

// Writes <scenario>_rep<i>.csv (one per trace), <scenario>_plot.csv and
// <scenario>_aggregate.json; every CSV starts with the header comment line.
std::vector<std::filesystem::path> write_report(const ScenarioReport& report,
                                                const std::filesystem::path& dir,
                                                std::uint64_t config_hash);

// ---------------------------------------------------------------------------
// Scenarios.

// Polynomial regression of a sine under repeated perturbation. step is the
// rate on the mean squared error; the summed loss is integrated with step/N.
struct SineConfig {
  std::uint64_t seed = 1;
  std::size_t train_points = 9;
  std::size_t test_points = 100;
  std::size_t degree = 39;
  double frequency = 4.0;
  FeatureBasis basis = FeatureBasis::monomial;
  double step = 0.2;
  double init_std = 0.0;
  bool perturb = true;
  double noise_std = 0.45;
  bool per_coordinate = true;
  std::size_t interval = 120'000;
  std::size_t cycles = 20;
  std::size_t perturbed_cycles = 10;
  std::size_t repetitions = 29;
  // Cycles end once the train MSE is below this (checked every 1000 steps).
  double reconverge_tolerance = 1e-7;
  std::size_t reconverge_budget = 480'000;
  std::size_t initial_budget = 2'000'000;
  double train_tolerance = 1e-6;
  std::size_t monte_carlo_repetitions = 200;
  double random_walk_tolerance = 0.2;
  // Unperturbed runs: total steps and recording interval.
  std::size_t control_steps = 250'000;
  std::size_t control_record_every = 10'000;
  double flat_norm_tolerance = 1e-6;

  static SineConfig control();
};

ScenarioReport sine_polynomial_perturbation(const SineConfig& config);

struct SweepConfig {
  std::uint64_t seed = 1;
  std::size_t train_points = 76;
  std::size_t test_points = 600;
  std::size_t min_degree = 1;
  std::size_t max_degree = 300;
  double frequency = 4.0;
  FeatureBasis basis = FeatureBasis::chebyshev;
  double train_tolerance = 1e-8;
  double underfit_threshold = 0.1;
  // Gram condition numbers above this are flagged.
  double condition_limit = 1e12;
};

ScenarioReport min_norm_degree_sweep(const SweepConfig& config);

struct ToyNetConfig {
  std::uint64_t seed = 1;
  std::size_t train_points = 30;
  std::size_t test_points = 400;
  std::vector<std::size_t> widths{2, 16, 16, 1};
  ActivationKind activation = ActivationKind::relu;
  LossKind loss = LossKind::logistic;
  double separation = 2.0;
  double blob_std = 0.6;
  // h = min(step/L, max_step) under inverse_loss.
  double step = 2e-2;
  StepRule step_rule = StepRule::fixed;
  double max_step = 1.0;
  double noise_fraction = 0.25;  // of each layer's weight std
  std::size_t interval = 300;
  std::size_t cycles = 8;
  std::size_t perturbed_cycles = 8;
  std::size_t repetitions = 20;
  std::size_t initial_budget = 100'000;
  std::size_t reconverge_budget = 20'000;
};

ScenarioReport toy_deepnet_perturbation(const ToyNetConfig& config);

struct GrowthConfig {
  std::uint64_t seed = 1;
  std::vector<int> layers{1, 2, 4};
  double f_tilde = 1.0;
  double rho0 = 1.0;
  double t_min = 1e-2;
  double t_max = 1e5;
  std::size_t samples_per_decade = 20;
  // RK4 step: absolute below t = 1, relative to t above.
  double step = 1e-3;
  double slope_from = 1e3;
  double slope_to = 1e5;
  double closed_form_from = 1.0;
  double closed_form_to = 1e4;
  double closed_form_tolerance = 1e-3;
  double check_time = 1e4;
};

ScenarioReport growth_asymptotics(const GrowthConfig& config);

struct DirectionConfig {
  std::uint64_t seed = 1;
  std::size_t samples = 10;
  double gap = 0.1;
  std::size_t initializations = 5;
  double init_std = 1.0;
  // Loss-scaled step h = step/(L·max‖x‖²).
  double step = 1.0;
  double t_max = 1e200;
  std::size_t max_steps = 200'000;
  double cosine_tolerance = 0.999;
  // Square-loss contrast runs on inputs lifted to this dimension.
  std::size_t lift_dim = 5;
  double square_tolerance = 1e-6;
  // Scale/direction and one-layer direction flows.
  bool normalized = true;
  std::size_t normalized_steps = 20'000;
  double unit_tolerance = 1e-6;
};

ScenarioReport convergence_direction_study(const DirectionConfig& config);

}  // namespace gradflow
