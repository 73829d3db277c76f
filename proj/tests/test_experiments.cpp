// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reduced-size scenario runs; the full-size ones live in the acceptance binary.

#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "gradflow/experiments.hpp"
#include "gradflow/io.hpp"
#include "support.hpp"

using namespace gradflow;
using namespace gradflow::testing;

namespace {

bool same_outputs(const ScenarioReport& a, const ScenarioReport& b) {
  if (a.traces.size() != b.traces.size() || a.plot_csv != b.plot_csv) return false;
  for (std::size_t i = 0; i < a.traces.size(); ++i)
    if (a.traces[i].csv != b.traces[i].csv) return false;
  return aggregate_json(a, 1) == aggregate_json(b, 1);
}

}  // namespace

TEST_CASE("Chebyshev nodes are the roots of T_n") {
  const Vector x = chebyshev_nodes(9);
  for (double xi : x) CHECK(std::fabs(std::cos(9 * std::acos(xi))) <= 1e-12);
  const Vector u = uniform_grid(5);
  CHECK(u.front() == -1.0);
  CHECK(u.back() == 1.0);
  CHECK(u[2] == doctest::Approx(0.0));
}

TEST_CASE("Chebyshev features match cos(k·acos x)") {
  for (double x : {-0.9, -0.1, 0.3, 1.0}) {
    const Vector t = polynomial_features(x, 40, FeatureBasis::chebyshev);
    const Vector m = polynomial_features(x, 5, FeatureBasis::monomial);
    for (std::size_t k = 0; k <= 40; ++k) CHECK(t[k] == doctest::Approx(std::cos(k * std::acos(x))).epsilon(1e-10));
    CHECK(m[3] == doctest::Approx(x * x * x));
  }
}

TEST_CASE("sine data and generators") {
  const Vector xs = chebyshev_nodes(4);
  const Dataset d = sine_dataset(xs, 4.0, 6, FeatureBasis::monomial);
  CHECK(d.dim() == 7);
  CHECK(d.labels[1] == doctest::Approx(std::sin(8 * std::numbers::pi * xs[1])));
  Rng rng(81);
  const Dataset s = random_separable_2d(12, 0.1, rng);
  CHECK(s.size() == 12);
  const auto blobs = gaussian_blobs(10, 2.0, 0.5, rng);
  CHECK(blobs.size() == 10);
}

TEST_CASE("growth scenario") {
  const auto r = growth_asymptotics({});
  for (const auto& p : r.predicates) CHECK_MESSAGE(p.passed, p.name << ": " << p.detail);
  CHECK(r.passed());
  CHECK(same_outputs(r, growth_asymptotics({})));
}

TEST_CASE("reduced degree sweep") {
  SweepConfig c;
  c.train_points = 12;
  c.test_points = 100;
  c.max_degree = 40;
  const auto r = min_norm_degree_sweep(c);
  CHECK(r.predicate("interpolation_past_threshold")->passed);
  CHECK(r.predicate("underfit_at_low_degree")->passed);
  CHECK(same_outputs(r, min_norm_degree_sweep(c)));
}

TEST_CASE("reduced direction study") {
  DirectionConfig c;
  c.initializations = 2;
  c.normalized_steps = 2000;
  const auto r = convergence_direction_study(c);
  CHECK(r.predicate("exponential_matches_svm")->passed);
  CHECK(r.predicate("square_zero_init_is_min_norm")->passed);
  CHECK(r.predicate("normalized_unit_norm")->passed);
  CHECK(same_outputs(r, convergence_direction_study(c)));
}

TEST_CASE("reduced sine perturbation") {
  SineConfig c;
  c.repetitions = 2;
  c.cycles = 4;
  c.perturbed_cycles = 2;
  c.interval = 20'000;
  c.monte_carlo_repetitions = 20;
  const auto r = sine_polynomial_perturbation(c);
  CHECK(r.predicate("train_error_returns")->passed);
  CHECK(r.traces.size() == 2);
  CHECK(r.traces[0].name == "rep000");
  CHECK(same_outputs(r, sine_polynomial_perturbation(c)));
}

TEST_CASE("reduced toy net") {
  ToyNetConfig c;
  c.repetitions = 2;
  c.cycles = 3;
  c.perturbed_cycles = 3;
  const auto r = toy_deepnet_perturbation(c);
  CHECK(r.predicate("train_error_returns")->passed);
  CHECK(same_outputs(r, toy_deepnet_perturbation(c)));
}

TEST_CASE("reports write header lines and stable file names") {
  const auto r = growth_asymptotics({});
  const auto dir = std::filesystem::temp_directory_path() / "gradflow_test_report";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto files = write_report(r, dir, 0x1234);
  REQUIRE_FALSE(files.empty());
  for (const auto& f : files) {
    const std::string text = read_file(f);
    if (f.extension() == ".csv") CHECK(text.rfind("# config_hash=0000000000001234 seed=1\n", 0) == 0);
  }
  CHECK(std::filesystem::exists(dir / "growth_plot.csv"));
  CHECK(std::filesystem::exists(dir / "growth_aggregate.json"));
  std::filesystem::remove_all(dir);
}
