// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss functionals L(W) = Σₙ ℓ(yₙ, f(W;xₙ)) and their weight gradients.
// Losses are sums over samples, not means.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradflow/linalg.hpp"
#include "gradflow/network.hpp"

namespace gradflow {

class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// binary: labels in {−1, +1}; multiclass: labels are class indices 0..C−1;
// regression: real targets (square loss only).
enum class TaskKind { binary, multiclass, regression };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct Dataset {
  std::vector<Vector> inputs;
  Vector labels;
  TaskKind task = TaskKind::binary;

  std::size_t size() const { return inputs.size(); }
  std::size_t dim() const { return inputs.empty() ? 0 : inputs.front().size(); }
  // Largest class index + 1 for multiclass data.
  std::size_t classes() const;
  // N×d matrix with xₙ as row n.
  Matrix data_matrix() const;
  // Throws DataError describing the first violated invariant.
  void validate() const;
};

enum class LossKind { square, exponential, logistic, softmax_cross_entropy };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

// Throws DataError when the loss cannot be used with the dataset's labels.
void check_compatible(LossKind kind, const Dataset& data);

// Per-sample exponents are clamped at this value.
inline constexpr double kExponentClamp = 709.0;

struct LossValue {
  double value = 0.0;
  bool overflow = false;  // some exponent hit kExponentClamp
};

LossValue loss(LossKind kind, const DeepNet& net, const Dataset& data);

// ℓ(y, f) and dℓ/df for a single scalar output (not softmax).
struct ScalarLoss {
  double value = 0.0;
  double slope = 0.0;
};
ScalarLoss scalar_sample_loss(LossKind kind, double f, double y, bool& overflow);

struct LossGradient {
  double loss = 0.0;
  std::vector<Matrix> layers;  // ∇_{W_k} L
  bool overflow = false;
  bool hit_kink = false;
};

LossGradient loss_gradient(LossKind kind, const DeepNet& net, const Dataset& data);

// Binary: minₙ yₙf(xₙ). Multiclass: minₙ min_{c≠yₙ} (f_{yₙ} − f_c).
double separability_margin(const DeepNet& net, const Dataset& data);

// Σ_k ⟨W*_k, ∇_{W_k}L(W)⟩ with the exponential loss (binary) or softmax cross
// entropy (multiclass) unless a kind is given. Rejects a separator whose
// margin is not positive.
double descent_direction_check(const DeepNet& net, const DeepNet& separator, const Dataset& data,
                               std::optional<LossKind> kind = std::nullopt);

// 0/1 error rate for classification, mean squared error for regression.
double classification_error(const DeepNet& net, const Dataset& data);

}  // namespace gradflow
