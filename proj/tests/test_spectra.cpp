// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "gradflow/spectra.hpp"
#include "support.hpp"

using namespace gradflow;
using namespace gradflow::testing;

TEST_CASE("classification of fixed spectra") {
  const auto r = classify(Matrix{{1, 0}, {0, -1}});
  CHECK(r.n_stable == 1);
  CHECK(r.n_unstable == 1);
  CHECK(r.n_zero == 0);
  CHECK(r.hyperbolic());
  CHECK(r.convention == kHessianConvention);

  const auto z = classify(Matrix(3, 3));
  CHECK(z.n_zero == 3);
  CHECK_FALSE(z.hyperbolic());
}

TEST_CASE("linear square-loss Hessian is 2Σxxᵀ") {
  Rng rng(61);
  const Dataset d = regression_data({rng.normal_vector(3), rng.normal_vector(3)}, {0.4, -1.0});
  Matrix expect(3, 3);
  for (const auto& x : d.inputs) expect += 2.0 * outer(x, x);
  for (int trial = 0; trial < 3; ++trial) {
    const DeepNet net({rng.normal_matrix(1, 3)}, Activation::linear());
    CHECK(frobenius_norm(hessian(LossKind::square, net, d) - expect) <= 1e-6 * frobenius_norm(expect));
  }
  // Rank 2 in three dimensions.
  CHECK(classify(expect).n_zero == 1);
}

TEST_CASE("linear exponential Hessian, closed form plus 2λ shift") {
  const Dataset d = binary_data({{1, 0.5}, {-0.3, 1}}, {1, -1});
  const DeepNet net({Matrix{{0.2, -0.4}}}, Activation::linear());
  const double lambda = 1e-2;
  Matrix expect(2, 2);
  for (std::size_t n = 0; n < 2; ++n) {
    const double e = std::exp(-d.labels[n] * forward(net, d.inputs[n]));
    expect += e * outer(d.inputs[n], d.inputs[n]);
  }
  for (std::size_t i = 0; i < 2; ++i) expect(i, i) += 2 * lambda;
  const Vector lam{lambda};
  const Matrix h = hessian(LossKind::exponential, net, d, lam);
  CHECK(frobenius_norm(h - expect) <= 1e-7 * frobenius_norm(expect));
  CHECK(classify(h).min_eigenvalue() >= 2 * lambda - 1e-8);
}

TEST_CASE("gradient and second-difference Hessians agree") {
  Rng rng(62);
  const std::vector<std::size_t> widths{2, 3, 1};
  for (int trial = 0; trial < 5; ++trial) {
    const DeepNet net = DeepNet::random(widths, Activation::smoothed_relu(0.5), rng);
    Dataset d = interpolated_by(net, 3, rng);
    for (auto& y : d.labels) y += 0.3 * rng.normal();
    const Matrix a = hessian(LossKind::square, net, d);
    const Matrix b = hessian_second_differences(LossKind::square, net, d);
    CHECK(frobenius_norm(a - b) <= 1e-3 * frobenius_norm(a));
  }
}

TEST_CASE("zero minimum: Hessian equals the virtual linear system") {
  Rng rng(63);
  const std::vector<std::size_t> widths{2, 4, 1};
  const DeepNet net = DeepNet::random(widths, Activation::smoothed_relu(0.5), rng);
  const Dataset d = interpolated_by(net, 3, rng);
  const Matrix h = hessian(LossKind::square, net, d);
  const Dataset v = virtual_linear_system(net, d);
  CHECK(v.dim() == net.parameter_count());
  const Matrix g = virtual_hessian(v);
  CHECK(frobenius_norm(h - g) <= 1e-4 * frobenius_norm(h));
  const auto rh = classify(h);
  CHECK(rh.min_eigenvalue() >= -1e-8 * rh.eigenvalues.front());
  CHECK(count_distinct(rh.eigenvalues) <= d.size());
  const auto verdict = conjugacy_compare(h, g);
  CHECK(verdict.topologically_conjugate);
}

TEST_CASE("virtual system of a linear net is the data itself") {
  const DeepNet lin({Matrix{{1, -2}}}, Activation::linear());
  const Dataset d = regression_data({{1, 1}, {0.5, 2}}, {-1, -3.5});
  const Dataset v = virtual_linear_system(lin, d);
  CHECK(v.inputs == d.inputs);
  const Dataset off = regression_data({{1, 1}}, {0.0});
  CHECK_THROWS_AS(virtual_linear_system(lin, off), SpectrumError);
}

TEST_CASE("Takeuchi instances are degenerate") {
  const std::vector<std::size_t> widths{2, 4, 1};
  CHECK(takeuchi_condition(widths, 1));
  Rng rng(64);
  const DeepNet net = DeepNet::random(widths, Activation::smoothed_relu(0.5), rng);
  const Dataset d = interpolated_by(net, 1, rng);
  CHECK(classify(hessian(LossKind::square, net, d)).n_zero >= 1);
  const std::vector<std::size_t> small{1, 1};
  CHECK_FALSE(takeuchi_condition(small, 1));
}

TEST_CASE("conjugacy verdicts") {
  const auto a = conjugacy_compare(Matrix{{2, 0}, {0, -1}}, Matrix{{5, 0}, {0, -3}});
  CHECK(a.topologically_conjugate);
  CHECK_FALSE(a.differentiably_conjugate_candidate);
  REQUIRE(a.exponent_map);
  CHECK((*a.exponent_map)[0] == doctest::Approx(2.5));
  CHECK((*a.exponent_map)[1] == doctest::Approx(3.0));

  Rng rng(65);
  const Matrix h = random_symmetric(4, rng);
  const auto q = symmetric_eig(random_symmetric(4, rng)).eigenvectors;
  const Matrix rotated = matmul(matmul(q, h), q.transpose());
  CHECK(conjugacy_compare(h, rotated).differentiably_conjugate_candidate);

  const auto mixed = conjugacy_compare(Matrix{{1}}, Matrix{{1, 0}, {0, 2}});
  CHECK_FALSE(mixed.exponent_map);
}

TEST_CASE("regularization restores hyperbolicity on a degenerate minimum") {
  Rng rng(66);
  const std::vector<std::size_t> widths{2, 3, 1};
  const DeepNet net = DeepNet::random(widths, Activation::smoothed_relu(0.5), rng);
  const Dataset d = interpolated_by(net, 2, rng);
  const Vector lambdas{1e-1, 1e-2, 0.0};
  const auto sweep = hyperbolicity_sweep(LossKind::square, net, d, lambdas);
  REQUIRE(sweep.size() == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(sweep[i].warning.empty());
    CHECK(sweep[i].gradient_norm <= 1e-8);
    CHECK(sweep[i].report.hyperbolic());
    CHECK(sweep[i].report.min_eigenvalue() > 0.0);
  }
  CHECK(sweep[2].report.n_zero >= 1);
}

TEST_CASE("sweep warns away from equilibria") {
  const DeepNet lin({Matrix{{1, 0}}}, Activation::linear());
  const Dataset d = regression_data({{1, 1}}, {5});
  SweepOptions o;
  o.relax = false;
  const Vector lambdas{0.1};
  const auto s = hyperbolicity_sweep(LossKind::square, lin, d, lambdas, o);
  CHECK_FALSE(s[0].warning.empty());
  const Vector negative{-1.0};
  CHECK_THROWS_AS(hyperbolicity_sweep(LossKind::square, lin, d, negative), SpectrumError);
}
