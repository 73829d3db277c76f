// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "gradflow/experiments.hpp"
#include "gradflow/flow.hpp"
#include "gradflow/oracles.hpp"
#include "support.hpp"

using namespace gradflow;
using namespace gradflow::testing;

namespace {

FlowState linear_state(Vector w, double step) {
  FlowState s;
  const std::size_t d = w.size();
  s.net = DeepNet({Matrix(1, d, std::move(w))}, Activation::linear());
  s.step = step;
  return s;
}

StopRule until_time(double t, std::size_t max_steps = 10'000'000) {
  StopRule r;
  r.kind = StopRule::Kind::max_time;
  r.max_time = t;
  r.max_steps = max_steps;
  return r;
}

}  // namespace

TEST_CASE("an equilibrium only advances time") {
  const Dataset fit = regression_data({{1, 0}}, {2});
  const FlowState s = linear_state({2, 0.5}, 0.1);
  const FlowState n = flow_step(s, LossKind::square, fit);
  CHECK(n.net == s.net);
  CHECK(n.time == doctest::Approx(0.1));
}

TEST_CASE("1D exponential flow tracks log(t + e^{w0})") {
  const Dataset d = binary_data({{1}}, {1});
  for (double w0 : {0.0, 0.7}) {
    const auto tr = run_flow(linear_state({w0}, 1e-3), LossKind::exponential, d, until_time(100.0));
    const double w = tr.final_state.net.layer(0)(0, 0);
    CHECK(rel_err(w, std::log(tr.final_state.time + std::exp(w0))) <= 1e-3);
  }
}

TEST_CASE("RK4 is far more accurate than Euler at the same step") {
  const Dataset d = binary_data({{1}}, {1});
  FlowState e = linear_state({0.0}, 0.05), r = e;
  r.integrator = Integrator::rk4;
  const double te = run_flow(e, LossKind::exponential, d, until_time(10.0)).final_state.net.layer(0)(0, 0);
  const double tr = run_flow(r, LossKind::exponential, d, until_time(10.0)).final_state.net.layer(0)(0, 0);
  const double exact = std::log(11.0);
  CHECK(std::fabs(tr - exact) < 1e-3 * std::fabs(te - exact));
}

TEST_CASE("square loss with N > d settles at the least-squares floor") {
  Rng rng(51);
  const Matrix x = rng.normal_matrix(6, 2);
  const Vector y = rng.normal_vector(6);
  Dataset d;
  d.task = TaskKind::regression;
  for (std::size_t n = 0; n < 6; ++n) d.inputs.emplace_back(x.row(n).begin(), x.row(n).end());
  d.labels = y;
  const Vector w = solve_dense(matmul(x.transpose(), x), matvec_transposed(x, y));
  double floor = 0.0;
  const Vector fit = matvec(x, w);
  for (std::size_t n = 0; n < 6; ++n) floor += (fit[n] - y[n]) * (fit[n] - y[n]);
  StopRule stop;
  stop.kind = StopRule::Kind::gradient_norm_below;
  stop.threshold = 1e-10;
  const auto tr = run_flow(linear_state({0, 0}, 0.02), LossKind::square, d, stop);
  CHECK(tr.converged);
  CHECK(rel_err(loss(LossKind::square, tr.final_state.net, d).value, floor) <= 1e-9);
}

TEST_CASE("square-loss flow from zero reaches the minimum-norm solution") {
  Rng rng(52);
  const Matrix x = rng.normal_matrix(3, 6);
  const Vector y = rng.normal_vector(3);
  Dataset d;
  d.task = TaskKind::regression;
  for (std::size_t n = 0; n < 3; ++n) d.inputs.emplace_back(x.row(n).begin(), x.row(n).end());
  d.labels = y;
  const Vector mn = min_norm_least_squares(x, y);
  const Matrix p = null_space_projector(x);
  const Vector c = matvec(p, rng.normal_vector(6));
  StopRule stop;
  stop.kind = StopRule::Kind::gradient_norm_below;
  stop.threshold = 1e-12;
  for (const Vector& w0 : {Vector(6, 0.0), c}) {
    const auto tr = run_flow(linear_state(w0, 0.01), LossKind::square, d, stop);
    const Vector w = flatten(tr.final_state.net);
    Vector expect = mn;
    for (std::size_t i = 0; i < 6; ++i) expect[i] += w0[i];
    CHECK(max_abs_diff(w, expect) <= 1e-6);
  }
}

TEST_CASE("null-space component is invariant under unperturbed flow") {
  Rng rng(53);
  const Matrix x = rng.normal_matrix(2, 5);
  const Matrix p = null_space_projector(x);
  Dataset d;
  d.task = TaskKind::binary;
  for (std::size_t n = 0; n < 2; ++n) d.inputs.emplace_back(x.row(n).begin(), x.row(n).end());
  d.labels = {1, -1};
  const Vector w0 = rng.normal_vector(5);
  const auto tr = run_flow(linear_state(w0, 0.01), LossKind::exponential, d, until_time(1e9, 10'000));
  const Vector a = matvec(p, w0), b = matvec(p, flatten(tr.final_state.net));
  CHECK(max_abs_diff(a, b) <= 1e-8);
}

TEST_CASE("non-separable pair flows to the hyperbolic equilibrium") {
  // Labels make x₁ a misfit: L = e^{x₁w} + e^{−x₂w}.
  const Dataset d = binary_data({{1}, {2}}, {-1, 1});
  const auto tr = run_flow(linear_state({3.0}, 0.01), LossKind::exponential, d, until_time(200.0));
  CHECK(tr.final_state.net.layer(0)(0, 0) == doctest::Approx(std::log(2.0) / 3).epsilon(1e-9));
  CHECK(nonseparable_equilibrium_1d(1, 2).slope < 0);
}

TEST_CASE("weight decay shrinks toward zero at rate 2λ") {
  const Dataset d = regression_data({{0.0}}, {0.0});
  FlowState s = linear_state({1.0}, 1e-4);
  s.lambdas = {0.5};
  s.integrator = Integrator::rk4;
  const auto tr = run_flow(s, LossKind::square, d, until_time(1.0));
  CHECK(tr.final_state.net.layer(0)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
}

TEST_CASE("loss explosion is rejected") {
  const Dataset d = regression_data({{10.0}}, {0.0});
  CHECK_THROWS_AS(flow_step(linear_state({1.0}, 10.0), LossKind::square, d), FlowError);
}

TEST_CASE("direction_converged stop and geometric records") {
  const Dataset d = binary_data({{1, 0.2}, {-1, 0.1}}, {1, -1});
  FlowState s = linear_state({0.1, 0.1}, 0.5);
  s.step_rule = StepRule::inverse_loss;
  s.max_step = 1e6;
  StopRule stop;
  stop.kind = StopRule::Kind::direction_converged;
  stop.threshold = 1e-3;
  stop.max_steps = 200'000;
  RecordCadence cad;
  cad.geometric_ratio = 2.0;
  const auto tr = run_flow(s, LossKind::exponential, d, stop, cad);
  CHECK(tr.converged);
  for (std::size_t i = 1; i < tr.records.size(); ++i) CHECK(tr.records[i].time > tr.records[i - 1].time);
}

TEST_CASE("normalized flow keeps unit layers and growing scales") {
  Rng rng(54);
  const Dataset d = binary_data({{1, 0.3}, {0.8, -0.2}, {-1, 0.1}}, {1, 1, -1});
  const DeepNet net({Matrix{{1.0, 0.1}}, Matrix{{1.0}}}, Activation::linear());
  NormalizedFlowState s = make_normalized_state(net, 0.01);
  double prev = s.rhos[0];
  for (int i = 0; i < 2000; ++i) {
    s = normalized_flow_step(s, d);
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::fabs(frobenius_norm(s.vs.layer(k)) - 1.0) <= 1e-6);
    CHECK(s.rhos[0] > prev);
    prev = s.rhos[0];
  }
}

TEST_CASE("direction flow keeps unit norm and rejects misclassified states") {
  const Dataset d = binary_data({{1, 0.3}, {-1, 0.1}}, {1, -1});
  DirectionFlowState s;
  s.norm = 1.0;
  s.direction = {1.0, 0.0};
  s.step = 0.01;
  DirectionRecord rec;
  for (int i = 0; i < 1000; ++i) s = direction_flow_step(s, d, &rec);
  CHECK(std::fabs(norm2(s.direction) - 1.0) <= 1e-12);
  CHECK(rec.projector_residual <= 1e-10);
  s.direction = {-1.0, 0.0};
  CHECK_THROWS_AS(direction_flow_step(s, d), FlowError);
}

TEST_CASE("perturbation keeps the data-space component and moves the null space") {
  Rng rng(55);
  const Matrix x = rng.normal_matrix(2, 4);
  Dataset d;
  d.task = TaskKind::regression;
  for (std::size_t n = 0; n < 2; ++n) d.inputs.emplace_back(x.row(n).begin(), x.row(n).end());
  d.labels = {0.5, -0.3};
  FlowState s = linear_state(Vector(4, 0.0), 0.05);
  s.rng_seed = 9;
  PerturbationProtocol p;
  p.noise_std = 0.1;
  p.interval = 2000;
  p.repetitions = 5;
  TraceProbe probe;
  probe.null_projector = null_space_projector(x);
  const auto tr = perturb_and_reconverge(s, p, LossKind::square, d, probe);
  REQUIRE(tr.records.size() == 6);
  // Record 0 is the initial state; every cycle end must refit the data.
  for (std::size_t i = 1; i < tr.records.size(); ++i) CHECK(tr.records[i].train_error <= 1e-10);
  CHECK(tr.records.back().nullspace_norm > 0.0);
  CHECK(tr.records.back().perturbation_count == 5);
}

TEST_CASE("growth integrators against the closed forms") {
  const Vector times{1.0, 10.0, 100.0};
  const auto k1 = integrate_equal_scale_growth(1, 1.0, 0.0, times, 1e-3);
  CHECK(rel_err(k1.samples.back().rhos[0], std::log(101.0)) <= 1e-6);
  const double c = growth_constant(2, 1.0, 1.0);
  const auto k2 = integrate_equal_scale_growth(2, 1.0, 1.0, times, 1e-3);
  for (std::size_t i = 0; i < times.size(); ++i)
    CHECK(rel_err(k2.samples[i].rhos[0], growth_closed_form(2, 1.0, times[i], c)) <= 1e-6);
}
