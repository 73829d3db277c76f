// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Linearization of the flow around equilibria. All spectra are of the loss
// Hessian H (positive semidefinite at minima); the flow linearization is
// δẆ = −H·δW, so an eigenvalue of H above +tol is a stable direction and one
// below −tol is unstable.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradflow/flow.hpp"
#include "gradflow/linalg.hpp"
#include "gradflow/losses.hpp"
#include "gradflow/network.hpp"

namespace gradflow {

inline constexpr const char* kHessianConvention = "loss_hessian: dW/dt = -H W, stable iff eigenvalue > tol";
inline constexpr std::size_t kMaxHessianDim = 500;
inline constexpr double kDefaultZeroTol = 1e-8;

struct SpectrumReport {
  Vector eigenvalues;  // descending
  std::size_t n_stable = 0;
  std::size_t n_unstable = 0;
  std::size_t n_zero = 0;
  double tol = kDefaultZeroTol;  // relative to the spectral radius
  double zero_threshold = 0.0;   // tol·max|λ|
  std::string convention = kHessianConvention;

  bool hyperbolic() const { return n_zero == 0; }
  double min_eigenvalue() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
};

// Hessian of L(W) + Σ_k λ_k‖W_k‖² over the flattened weights, by central
// differences of the analytic gradient with step 1e-5·max(1, |wᵢ|), then
// symmetrized. Throws SpectrumError when the raw matrix is asymmetric beyond
// 1e-4 relative.
Matrix hessian(LossKind kind, const DeepNet& net, const Dataset& data,
               std::span<const double> lambdas = {});

// Independent construction from second differences of the loss itself.
Matrix hessian_second_differences(LossKind kind, const DeepNet& net, const Dataset& data,
                                  std::span<const double> lambdas = {}, double step = 1e-4);

class SpectrumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

SpectrumReport classify(const Matrix& h, double tol = kDefaultZeroTol);

// Number of distinct nonzero eigenvalues: values within rel·max|λ| of their
// sorted neighbour share a cluster; |λ| ≤ zero_tol·max|λ| is excluded.
std::size_t count_distinct(std::span<const double> eigenvalues, double rel = 1e-6,
                           double zero_tol = kDefaultZeroTol);

struct SweepOptions {
  double tol = kDefaultZeroTol;
  // Each λ > 0 is relaxed to its regularized equilibrium from the given net:
  // flow until the gradient norm is below flow_gradient_tol, then Newton steps.
  bool relax = true;
  double step = 1e-2;
  std::size_t max_flow_steps = 2'000'000;
  double flow_gradient_tol = 1e-5;
  std::size_t newton_steps = 40;  // damped; stops early when no step helps
  // Above this final gradient norm the point is reported as non-equilibrium.
  double equilibrium_tol = 1e-8;
};

struct SweepEntry {
  double lambda = 0.0;
  SpectrumReport report;
  DeepNet equilibrium;
  double gradient_norm = 0.0;
  std::string warning;  // empty when the point is an equilibrium
};

std::vector<SweepEntry> hyperbolicity_sweep(LossKind kind, const DeepNet& net, const Dataset& data,
                                            std::span<const double> lambda_list,
                                            const SweepOptions& options = {});

// Gradient norm of the λ-regularized objective (same λ on every layer).
double regularized_gradient_norm(LossKind kind, const DeepNet& net, const Dataset& data,
                                 double lambda);

// Relaxes net to a zero of the λ-regularized gradient (flow, then Newton).
DeepNet relax_to_equilibrium(LossKind kind, const DeepNet& net, const Dataset& data, double lambda,
                             const SweepOptions& options = {});

// Virtual inputs x′ₙ = ∇_W f(W;xₙ) (flattened) with the original targets.
// Throws SpectrumError unless every residual |yₙ − f(xₙ)| is ≤ 1e-6.
Dataset virtual_linear_system(const DeepNet& net, const Dataset& data);

// 2Σₙ x′ₙx′ₙᵀ (+ 2λI): the square-loss Hessian of the linear model on x′.
Matrix virtual_hessian(const Dataset& virtual_data, double lambda = 0.0);

struct ConjugacyVerdict {
  bool topologically_conjugate = false;
  bool differentiably_conjugate_candidate = false;
  std::optional<Vector> exponent_map;  // νᵢ/μᵢ per matched same-sign pair
  SpectrumReport a;
  SpectrumReport b;
};

ConjugacyVerdict conjugacy_compare(const Matrix& h_a, const Matrix& h_b, double tol = 1e-8);

// Parameter count exceeds n·N_K, the rank bound of the Gauss-Newton matrix
// Σₙ∇fₙ∇fₙᵀ, so every interpolating square-loss minimum is degenerate.
bool takeuchi_condition(std::span<const std::size_t> widths, std::size_t samples);

}  // namespace gradflow
