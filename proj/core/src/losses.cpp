// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gradflow {

namespace {

// e^{a} with a clamped at kExponentClamp.
double guarded_exp(double a, bool& overflow) {
  if (a > kExponentClamp) {
    overflow = true;
    a = kExponentClamp;
  }
  return std::exp(a);
}

// log(1 + e^{a}) without overflow.
double softplus(double a) { return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

std::size_t class_index(double label) { return static_cast<std::size_t>(label); }

double sample_loss(LossKind kind, std::span<const double> out, double y, bool& overflow) {
  switch (kind) {
    case LossKind::square: {
      const double r = y - out[0];
      return r * r;
    }
    case LossKind::exponential:
      return guarded_exp(-y * out[0], overflow);
    case LossKind::logistic:
      return softplus(-y * out[0]);
    case LossKind::softmax_cross_entropy:
      return log_sum_exp(out) - out[class_index(y)];
  }
  return 0.0;
}

Vector sample_upstream(LossKind kind, std::span<const double> out, double y, bool& overflow) {
  switch (kind) {
    case LossKind::square:
      return {-2.0 * (y - out[0])};
    case LossKind::exponential:
      return {-y * guarded_exp(-y * out[0], overflow)};
    case LossKind::logistic:
      return {-y * sigmoid(-y * out[0])};
    case LossKind::softmax_cross_entropy: {
      const double lse = log_sum_exp(out);
      Vector g(out.size());
      for (std::size_t c = 0; c < out.size(); ++c) g[c] = std::exp(out[c] - lse);
      g[class_index(y)] -= 1.0;
      return g;
    }
  }
  return {};
}

}  // namespace

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::binary:
      return "binary";
    case TaskKind::multiclass:
      return "multiclass";
    case TaskKind::regression:
      return "regression";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "binary") return TaskKind::binary;
  if (name == "multiclass") return TaskKind::multiclass;
  if (name == "regression") return TaskKind::regression;
  throw DataError("unknown task '" + name + "'");
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::square:
      return "square";
    case LossKind::exponential:
      return "exponential";
    case LossKind::logistic:
      return "logistic";
    case LossKind::softmax_cross_entropy:
      return "softmax_cross_entropy";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "square") return LossKind::square;
  if (name == "exponential") return LossKind::exponential;
  if (name == "logistic") return LossKind::logistic;
  if (name == "softmax_cross_entropy" || name == "cross_entropy") return LossKind::softmax_cross_entropy;
  throw DataError("unknown loss '" + name + "'");
}

std::size_t Dataset::classes() const {
  double top = -1.0;
  for (double y : labels) top = std::max(top, y);
  return static_cast<std::size_t>(top + 1.0);
}

Matrix Dataset::data_matrix() const {
  Matrix x(size(), dim());
  for (std::size_t n = 0; n < size(); ++n)
    std::copy(inputs[n].begin(), inputs[n].end(), x.row(n).begin());
  return x;
}

void Dataset::validate() const {
  if (inputs.empty()) throw DataError("dataset has no samples");
  if (labels.size() != inputs.size()) {
    throw DataError("dataset has " + std::to_string(inputs.size()) + " inputs but " +
                    std::to_string(labels.size()) + " labels");
  }
  const std::size_t d = dim();
  if (d == 0) throw DataError("inputs have zero dimension");
  for (std::size_t n = 0; n < size(); ++n) {
    if (inputs[n].size() != d) {
      throw DataError("input " + std::to_string(n) + " has dimension " +
                      std::to_string(inputs[n].size()) + ", expected " + std::to_string(d));
    }
    for (double v : inputs[n])
      if (!std::isfinite(v)) throw DataError("input " + std::to_string(n) + " is not finite");
    const double y = labels[n];
    switch (task) {
      case TaskKind::binary:
        if (y != 1.0 && y != -1.0)
          throw DataError("binary label " + std::to_string(n) + " is not ±1");
        break;
      case TaskKind::multiclass:
        if (!(y >= 0.0) || y != std::floor(y))
          throw DataError("class label " + std::to_string(n) + " is not a non-negative integer");
        break;
      case TaskKind::regression:
        if (!std::isfinite(y)) throw DataError("target " + std::to_string(n) + " is not finite");
        break;
    }
  }
}

void check_compatible(LossKind kind, const Dataset& data) {
  const bool ok = [&] {
    switch (kind) {
      case LossKind::square:
        return data.task != TaskKind::multiclass;
      case LossKind::exponential:
      case LossKind::logistic:
        return data.task == TaskKind::binary;
      case LossKind::softmax_cross_entropy:
        return data.task == TaskKind::multiclass;
    }
    return false;
  }();
  if (!ok) {
    throw DataError(std::string(to_string(kind)) + " loss does not accept " + to_string(data.task) +
                    " labels");
  }
}

namespace {

void check_shapes(LossKind kind, const DeepNet& net, const Dataset& data) {
  check_compatible(kind, data);
  if (data.dim() != net.input_dim()) {
    throw DataError("inputs have dimension " + std::to_string(data.dim()) + ", net expects " +
                    std::to_string(net.input_dim()));
  }
  if (kind == LossKind::softmax_cross_entropy) {
    if (data.classes() > net.output_dim()) {
      throw DataError("labels reference " + std::to_string(data.classes()) +
                      " classes, net has " + std::to_string(net.output_dim()) + " outputs");
    }
  } else if (net.output_dim() != 1) {
    throw DataError(std::string(to_string(kind)) + " loss needs a single-output net");
  }
}

}  // namespace

ScalarLoss scalar_sample_loss(LossKind kind, double f, double y, bool& overflow) {
  switch (kind) {
    case LossKind::square:
      return {(y - f) * (y - f), -2.0 * (y - f)};
    case LossKind::exponential: {
      const double e = guarded_exp(-y * f, overflow);
      return {e, -y * e};
    }
    case LossKind::logistic:
      return {softplus(-y * f), -y * sigmoid(-y * f)};
    case LossKind::softmax_cross_entropy:
      break;
  }
  throw DataError("softmax cross entropy has no scalar form");
}

LossValue loss(LossKind kind, const DeepNet& net, const Dataset& data) {
  check_shapes(kind, net, data);
  LossValue out;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Vector f = forward_vector(net, data.inputs[n]);
    out.value += sample_loss(kind, f, data.labels[n], out.overflow);
  }
  return out;
}

LossGradient loss_gradient(LossKind kind, const DeepNet& net, const Dataset& data) {
  check_shapes(kind, net, data);
  LossGradient out;
  for (const auto& w : net.layers()) out.layers.emplace_back(w.rows(), w.cols());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double y = data.labels[n];
    double value = 0.0;
    auto g = backpropagate(net, data.inputs[n], [&](std::span<const double> f) {
      value = sample_loss(kind, f, y, out.overflow);
      return sample_upstream(kind, f, y, out.overflow);
    });
    out.loss += value;
    out.hit_kink = out.hit_kink || g.hit_kink;
    for (std::size_t k = 0; k < out.layers.size(); ++k) out.layers[k] += g.layers[k];
  }
  return out;
}

double separability_margin(const DeepNet& net, const Dataset& data) {
  if (data.task == TaskKind::regression)
    throw DataError("separability is undefined for regression targets");
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Vector f = forward_vector(net, data.inputs[n]);
    if (data.task == TaskKind::binary) {
      margin = std::min(margin, data.labels[n] * f[0]);
    } else {
      const std::size_t yn = class_index(data.labels[n]);
      for (std::size_t c = 0; c < f.size(); ++c)
        if (c != yn) margin = std::min(margin, f[yn] - f[c]);
    }
  }
  return margin;
}

double descent_direction_check(const DeepNet& net, const DeepNet& separator, const Dataset& data,
                               std::optional<LossKind> kind) {
  const LossKind k = kind.value_or(data.task == TaskKind::multiclass ? LossKind::softmax_cross_entropy
                                                                     : LossKind::exponential);
  if (separator.layers().size() != net.layers().size())
    throw DataError("separator depth differs from the net");
  for (std::size_t i = 0; i < net.depth(); ++i) {
    if (separator.layer(i).rows() != net.layer(i).rows() ||
        separator.layer(i).cols() != net.layer(i).cols())
      throw DataError("separator layer " + std::to_string(i + 1) + " has a different shape");
  }
  const double m = separability_margin(separator, data);
  if (!(m > 0.0)) {
    throw DataError("separator does not separate the data (margin " + std::to_string(m) + ")");
  }
  const auto g = loss_gradient(k, net, data);
  double s = 0.0;
  for (std::size_t i = 0; i < net.depth(); ++i) s += frobenius_dot(separator.layer(i), g.layers[i]);
  return s;
}

double classification_error(const DeepNet& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Vector f = forward_vector(net, data.inputs[n]);
    switch (data.task) {
      case TaskKind::binary:
        acc += data.labels[n] * f[0] > 0.0 ? 0.0 : 1.0;
        break;
      case TaskKind::multiclass: {
        const auto best = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
        acc += best == class_index(data.labels[n]) ? 0.0 : 1.0;
        break;
      }
      case TaskKind::regression: {
        const double r = data.labels[n] - f[0];
        acc += r * r;
        break;
      }
    }
  }
  return acc / static_cast<double>(data.size());
}

}  // namespace gradflow
