// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense deep network f(W;x) = W_K σ(W_{K−1} ⋯ σ(W_1 x)) with per-layer
// analytic gradients. The readout layer is linear unless activate_output is
// set, in which case σ is applied after W_K as well.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradflow/linalg.hpp"

namespace gradflow {

class Rng;

class NetworkError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ActivationKind { linear, relu, smoothed_relu, polynomial };

const char* to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& name);

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  // smoothed_relu: σ(z) = z·sigmoid(z/ε²).
  double epsilon = 0.05;
  // polynomial: σ(z) = Σᵢ cᵢ zⁱ.
  std::vector<double> coefficients;

  static Activation linear() { return {ActivationKind::linear, 0.05, {}}; }
  static Activation relu() { return {ActivationKind::relu, 0.05, {}}; }
  static Activation smoothed_relu(double eps = 0.05) {
    return {ActivationKind::smoothed_relu, eps, {}};
  }
  static Activation polynomial(std::vector<double> coeffs) {
    return {ActivationKind::polynomial, 0.05, std::move(coeffs)};
  }

  double value(double z) const;
  double derivative(double z) const;
  bool positively_homogeneous() const {
    return kind == ActivationKind::relu || kind == ActivationKind::linear;
  }

  bool operator==(const Activation&) const = default;
};

class DeepNet {
 public:
  DeepNet() = default;
  DeepNet(std::vector<Matrix> layers, Activation activation, bool activate_output = false);

  // Layer widths [d, N₁, …, N_K] with weights drawn N(0, scale²/fan_in).
  static DeepNet random(std::span<const std::size_t> widths, Activation activation, Rng& rng,
                        double scale = 1.0);

  const std::vector<Matrix>& layers() const { return layers_; }
  const Matrix& layer(std::size_t k) const { return layers_.at(k); }
  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().cols(); }
  std::size_t output_dim() const { return layers_.back().rows(); }
  std::size_t parameter_count() const;
  const Activation& activation() const { return activation_; }
  bool activate_output() const { return activate_output_; }

  DeepNet with_layers(std::vector<Matrix> layers) const {
    return DeepNet(std::move(layers), activation_, activate_output_);
  }

  bool operator==(const DeepNet&) const = default;

 private:
  std::vector<Matrix> layers_;
  Activation activation_;
  bool activate_output_ = false;
};

// Concatenation of row-major layer entries, layer 1 first.
Vector flatten(const std::vector<Matrix>& layers);
Vector flatten(const DeepNet& net);
std::vector<Matrix> unflatten_like(const DeepNet& shape, std::span<const double> params);

Vector forward_vector(const DeepNet& net, std::span<const double> x);
// Scalar output; the net must have a single output row.
double forward(const DeepNet& net, std::span<const double> x);

struct LayerGradient {
  std::vector<Matrix> layers;  // same shapes as the net's layers
  // A relu pre-activation was exactly zero; the subgradient 0 was used there.
  bool hit_kink = false;
};

// ∂(uᵀf)/∂W_k for an upstream vector u of length output_dim.
LayerGradient backpropagate(const DeepNet& net, std::span<const double> x,
                            std::span<const double> upstream);
// Single forward/backward pass where the upstream vector is computed from the
// net output (e.g. dℓ/df). The output is stored in *output when non-null.
LayerGradient backpropagate(const DeepNet& net, std::span<const double> x,
                            const std::function<Vector(std::span<const double>)>& upstream_of,
                            Vector* output = nullptr);
// ∂f/∂W_k for a single-output net.
LayerGradient layer_gradients(const DeepNet& net, std::span<const double> x);

// Per-layer 0/1 indicators of positive pre-activation for one sample; layer k
// entry has length N_k. Readout entries are included only if the output is
// activated.
std::vector<std::vector<std::uint8_t>> activation_profile(const DeepNet& net,
                                                          std::span<const double> x);

// |Σᵢⱼ ∂f/∂(W_k)ᵢⱼ·(W_k)ᵢⱼ − f(x)|; only defined for relu/linear nets.
double homogeneity_residual(const DeepNet& net, std::span<const double> x, std::size_t k);

struct NormalizedNet {
  Vector scales;  // ρ_k = ‖W_k‖_F
  DeepNet net;    // layers V_k = W_k/ρ_k
};

NormalizedNet normalize_layers(const DeepNet& net);

}  // namespace gradflow
