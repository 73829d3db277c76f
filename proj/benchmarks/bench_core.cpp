// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "gradflow/experiments.hpp"
#include "gradflow/flow.hpp"
#include "gradflow/oracles.hpp"
#include "gradflow/random.hpp"
#include "gradflow/spectra.hpp"

namespace {

using namespace gradflow;

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix a = rng.normal_matrix(n, n);
  return 0.5 * (a + a.transpose());
}

void BM_SymmetricEig(benchmark::State& state) {
  const Matrix a = random_symmetric(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_eig(a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SymmetricEig)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNCubed);

void BM_MinNormSolve(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = rng.normal_matrix(n, 4 * n);
  const Vector y = rng.normal_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(min_norm_solve(x, y));
}
BENCHMARK(BM_MinNormSolve)->Arg(9)->Arg(38)->Arg(76);

// One Euler step of the toy-net flow (2-16-16-1 relu, 30 blob samples).
void BM_FlowStep(benchmark::State& state) {
  Rng rng(3);
  const std::vector<std::size_t> widths{2, 16, 16, 1};
  FlowState s;
  s.net = DeepNet::random(widths, Activation::relu(), rng);
  s.step = 1e-3;
  s.integrator = state.range(0) ? Integrator::rk4 : Integrator::euler;
  const Dataset data = gaussian_blobs(30, 2.0, 0.6, rng);
  for (auto _ : state) benchmark::DoNotOptimize(flow_step(s, LossKind::logistic, data));
}
BENCHMARK(BM_FlowStep)->ArgName("rk4")->Arg(0)->Arg(1);

void BM_Hessian(benchmark::State& state) {
  Rng rng(4);
  const std::vector<std::size_t> widths{2, static_cast<std::size_t>(state.range(0)), 1};
  const DeepNet net = DeepNet::random(widths, Activation::smoothed_relu(0.5), rng);
  Dataset data;
  data.task = TaskKind::regression;
  for (int n = 0; n < 5; ++n) {
    data.inputs.push_back(rng.normal_vector(2));
    data.labels.push_back(rng.normal());
  }
  for (auto _ : state) benchmark::DoNotOptimize(hessian(LossKind::square, net, data));
  state.counters["params"] = static_cast<double>(net.parameter_count());
}
BENCHMARK(BM_Hessian)->Arg(4)->Arg(16)->Arg(64);

void BM_HardMarginSvm(benchmark::State& state) {
  Rng rng(5);
  const Dataset data = random_separable_2d(static_cast<std::size_t>(state.range(0)), 0.1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(hard_margin_svm(data));
}
BENCHMARK(BM_HardMarginSvm)->Arg(5)->Arg(15);

void BM_LogarithmicIntegral(benchmark::State& state) {
  double z = 2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(logarithmic_integral(z));
    z = z < 1e8 ? z * 1.7 : 2.0;
  }
}
BENCHMARK(BM_LogarithmicIntegral);

}  // namespace

BENCHMARK_MAIN();
