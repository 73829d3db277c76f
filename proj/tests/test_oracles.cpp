// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gradflow/experiments.hpp"
#include "gradflow/oracles.hpp"
#include "support.hpp"

using namespace gradflow;
using namespace gradflow::testing;

namespace {

// Ramanujan's series for li, independent of the library's quadrature:
// li(x) = γ + log log x + √x Σₙ (−1)ⁿ⁻¹ (log x)ⁿ/(n! 2ⁿ⁻¹) Σ_{k<⌈n/2⌉} 1/(2k+1).
double li_series(double x) {
  const double l = std::log(x);
  double sum = 0.0, term = 2.0, inner = 0.0;
  for (int n = 1; n < 400; ++n) {
    term *= l / (2.0 * n);  // (log x)ⁿ/(n! 2ⁿ⁻¹)
    if (n % 2 == 1) inner += 1.0 / n;
    sum += (n % 2 ? 1.0 : -1.0) * term * inner;
  }
  return std::numbers::egamma_v<double> + std::log(l) + std::sqrt(x) * sum;
}

// Direction that maximizes the minimum signed margin, by a fine angle scan.
Vector svm_by_angle_scan(const Dataset& d) {
  double best = -1e300, best_a = 0.0;
  const int steps = 200000;
  for (int i = 0; i < steps; ++i) {
    const double a = 2 * std::numbers::pi * i / steps;
    double m = 1e300;
    for (std::size_t n = 0; n < d.size(); ++n)
      m = std::min(m, d.labels[n] * (std::cos(a) * d.inputs[n][0] + std::sin(a) * d.inputs[n][1]));
    if (m > best) {
      best = m;
      best_a = a;
    }
  }
  return {std::cos(best_a), std::sin(best_a)};
}

}  // namespace

TEST_CASE("li against Ramanujan's series") {
  CHECK(rel_err(li_series(2.0), 1.0451637801174927) <= 1e-14);
  CHECK(rel_err(logarithmic_integral(2.0), 1.0451637801174927) <= 1e-12);
  for (double z : {1.01, 1.5, 3.0, 10.0, 1e3, 1e8})
    CHECK(rel_err(logarithmic_integral(z), li_series(z)) <= 1e-10);
  CHECK(logarithmic_integral(std::numbers::e) > logarithmic_integral(2.0));
}

TEST_CASE("li inverse round trip") {
  CHECK(std::fabs(inverse_logarithmic_integral(logarithmic_integral(5.0)) - 5.0) <= 1e-8);
  for (double z : {1.1, 2.0, 50.0, 1e6}) CHECK(rel_err(inverse_logarithmic_integral(logarithmic_integral(z)), z) <= 1e-10);
  CHECK_THROWS(logarithmic_integral(0.5));
}

TEST_CASE("growth closed form") {
  // K=1, ρ₀=0: ρ = log(t + 1).
  const double c = growth_constant(1, 1.0, 0.0);
  CHECK(growth_closed_form(1, 1.0, 100.0, c) == doctest::Approx(4.61512051684126));
  // K=2 at t=0 returns ρ₀.
  const double c2 = growth_constant(2, 1.0, 1.3);
  CHECK(growth_closed_form(2, 1.0, 0.0, c2) == doctest::Approx(1.3).epsilon(1e-10));
}

TEST_CASE("hard-margin svm, closed cases") {
  const auto two = hard_margin_svm(binary_data({{1, 0}, {-1, 0}}, {1, -1}));
  REQUIRE(two.separable());
  CHECK(two.solution->w_raw[0] == doctest::Approx(1.0));
  CHECK(std::fabs(two.solution->w_raw[1]) <= 1e-15);
  CHECK(two.solution->margin == doctest::Approx(1.0));

  const auto one = hard_margin_svm(binary_data({{3, 4}}, {1}));
  REQUIRE(one.separable());
  CHECK(one.solution->w_raw[0] == doctest::Approx(3.0 / 25));
  CHECK(one.solution->w_raw[1] == doctest::Approx(4.0 / 25));
  CHECK(norm2(one.solution->w_raw) == doctest::Approx(0.2));
}

TEST_CASE("hard-margin svm matches a brute-force angle scan") {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset d = random_separable_2d(8, 0.1, rng);
    const auto r = hard_margin_svm(d);
    REQUIRE(r.separable());
    CHECK(cosine(r.solution->w_tilde, svm_by_angle_scan(d)) >= 1 - 1e-8);
  }
  const auto tri = hard_margin_svm(binary_data({{2, 0}, {0, 2}, {-1, -1}}, {1, 1, -1}));
  REQUIRE(tri.separable());
  CHECK(cosine(tri.solution->w_tilde, svm_by_angle_scan(binary_data({{2, 0}, {0, 2}, {-1, -1}}, {1, 1, -1}))) >=
        1 - 1e-8);
}

TEST_CASE("hard-margin svm reports non-separable data") {
  const auto r = hard_margin_svm(binary_data({{1, 0}, {2, 0}}, {1, -1}));
  CHECK_FALSE(r.separable());
  CHECK_FALSE(r.violated_indices.empty());
}

TEST_CASE("non-separable 1D equilibrium") {
  const auto a = nonseparable_equilibrium_1d(1.0, 2.0);
  CHECK(a.w == doctest::Approx(0.2310490601866484).epsilon(1e-12));
  CHECK(a.slope < 0.0);
  const auto b = nonseparable_equilibrium_1d(1.0, std::numbers::e);
  CHECK(b.w == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(b.slope < 0.0);
}

TEST_CASE("finite-difference gradient check") {
  auto quad = [](std::span<const double> p) { return 3 * p[0] * p[0] + p[0] * p[1] - 2 * p[1] * p[1]; };
  const Vector p{0.7, -1.1};
  const Vector g{6 * p[0] + p[1], p[0] - 4 * p[1]};
  CHECK(fd_gradient_check(quad, p, g) <= 1e-10);
  Vector bad = g;
  bad[1] *= 1.01;
  CHECK(fd_gradient_check(quad, p, bad) >= 1e-3);

  // Exponential-loss linear model.
  const Dataset d = binary_data({{1, 2}, {-0.5, 1}}, {1, -1});
  auto f = [&](std::span<const double> w) {
    double s = 0.0;
    for (std::size_t n = 0; n < 2; ++n) s += std::exp(-d.labels[n] * dot(w, d.inputs[n]));
    return s;
  };
  const Vector w{0.3, -0.2};
  Vector grad(2, 0.0);
  for (std::size_t n = 0; n < 2; ++n) {
    const double e = std::exp(-d.labels[n] * dot(w, d.inputs[n]));
    for (int i = 0; i < 2; ++i) grad[i] -= e * d.labels[n] * d.inputs[n][i];
  }
  CHECK(fd_gradient_check(f, w, grad, 1e-6) <= 1e-6);
}
