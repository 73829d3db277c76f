// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent ground truth for flow limits. Everything here is brute force or
// closed form on purpose; none of it calls into the flow integrators.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradflow/linalg.hpp"
#include "gradflow/losses.hpp"

namespace gradflow {

class OracleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MarginSolution {
  Vector w_tilde;  // unit max-margin direction
  Vector w_raw;    // minimum-norm w with yₙwᵀxₙ ≥ 1
  double margin = 0.0;  // 1/‖w_raw‖
  std::vector<std::size_t> support_indices;
};

struct SvmResult {
  std::optional<MarginSolution> solution;
  // Set when no feasible candidate exists: sign(yₙwᵀxₙ) of the least violating
  // candidate, and the indices where it is not positive.
  std::vector<int> sign_pattern;
  std::vector<std::size_t> violated_indices;

  bool separable() const { return solution.has_value(); }
};

inline constexpr std::size_t kSvmMaxSamples = 20;

// Hard-margin SVM through the origin by support-subset enumeration. Every
// subset S of size ≤ min(N, d) gets the minimum-norm solution of
// {yₙwᵀxₙ = 1, n ∈ S}; consistent, globally feasible candidates compete on
// norm (ties keep the first subset in size-then-lexicographic order). Larger
// subsets add nothing: a consistent system on S has the same solution set as
// a row basis of S, which has at most d rows.
SvmResult hard_margin_svm(const Dataset& data);

// Principal value of ∫₀ᶻ dt/log t for z > 1.
double logarithmic_integral(double z);
// Inverse of li on (1, ∞): bracketed Newton with bisection fallback.
double inverse_logarithmic_integral(double value);
// li(z) − z/log z, the large-depth limit form of the growth law.
double logarithmic_integral_limit_form(double z);

// Constant C of the closed-form growth law for initial scale rho0 (K ∈ {1,2}).
// K=1: C = e^{ρ₀f̃}; K=2: C = li(e^{ρ₀²f̃}).
double growth_constant(int layers, double f_tilde, double rho0);
// Equal-scale growth law ρ̇ = f̃Kρ^{K−1}e^{−ρᴷf̃} solved in closed form.
// K=1: ρ = log(f̃²t + C)/f̃. K=2: ρ = √(log li⁻¹(4f̃t + C)/f̃).
double growth_closed_form(int layers, double f_tilde, double t, double constant);

struct NonseparableEquilibrium {
  double w = 0.0;      // root of F(w) = −x₁e^{x₁w} + x₂e^{−x₂w}
  double slope = 0.0;  // F′(w*)
  int iterations = 0;
};

NonseparableEquilibrium nonseparable_equilibrium_1d(double x1, double x2);

using ScalarField = std::function<double(std::span<const double>)>;

Vector central_difference_gradient(const ScalarField& f, std::span<const double> point,
                                   double step = 1e-6);

// Worst per-coordinate discrepancy between an analytic gradient and central
// differences: |gᵢ − dᵢ| / max(|gᵢ|, |dᵢ|, 1e-2·‖d‖_∞, 1e-300).
double fd_gradient_check(const ScalarField& f, std::span<const double> point,
                         std::span<const double> gradient, double step = 1e-6);

}  // namespace gradflow
