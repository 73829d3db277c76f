// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/network.hpp"

#include <cmath>

#include "gradflow/random.hpp"

namespace gradflow {

namespace {

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

struct Trace {
  std::vector<Vector> pre;   // pre[k] = W_k · in[k]
  std::vector<Vector> post;  // post[k] = σ(pre[k]) for hidden layers (or activated output)
};

bool activated(const DeepNet& net, std::size_t k) {
  return k + 1 < net.depth() || net.activate_output();
}

Trace run_forward(const DeepNet& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) {
    throw NetworkError("layer 1 expects input of length " + std::to_string(net.input_dim()) +
                       ", got " + std::to_string(x.size()));
  }
  Trace t;
  t.pre.reserve(net.depth());
  t.post.reserve(net.depth());
  const auto& act = net.activation();
  for (std::size_t k = 0; k < net.depth(); ++k) {
    std::span<const double> in = k == 0 ? x : std::span<const double>(t.post.back());
    Vector z = matvec(net.layer(k), in);
    Vector a = z;
    if (activated(net, k))
      for (double& v : a) v = act.value(v);
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
  }
  return t;
}

}  // namespace

const char* to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::linear:
      return "linear";
    case ActivationKind::relu:
      return "relu";
    case ActivationKind::smoothed_relu:
      return "smoothed_relu";
    case ActivationKind::polynomial:
      return "polynomial";
  }
  return "unknown";
}

ActivationKind activation_kind_from_string(const std::string& name) {
  if (name == "linear") return ActivationKind::linear;
  if (name == "relu") return ActivationKind::relu;
  if (name == "smoothed_relu") return ActivationKind::smoothed_relu;
  if (name == "polynomial") return ActivationKind::polynomial;
  throw NetworkError("unknown activation '" + name + "'");
}

double Activation::value(double z) const {
  switch (kind) {
    case ActivationKind::linear:
      return z;
    case ActivationKind::relu:
      return z > 0.0 ? z : 0.0;
    case ActivationKind::smoothed_relu:
      return z * sigmoid(z / (epsilon * epsilon));
    case ActivationKind::polynomial: {
      double acc = 0.0;
      for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * z + *it;
      return acc;
    }
  }
  return 0.0;
}

double Activation::derivative(double z) const {
  switch (kind) {
    case ActivationKind::linear:
      return 1.0;
    case ActivationKind::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::smoothed_relu: {
      const double e2 = epsilon * epsilon;
      const double s = sigmoid(z / e2);
      return s + (z / e2) * s * (1.0 - s);
    }
    case ActivationKind::polynomial: {
      double acc = 0.0;
      for (std::size_t i = coefficients.size(); i-- > 1;)
        acc = acc * z + static_cast<double>(i) * coefficients[i];
      return acc;
    }
  }
  return 0.0;
}

DeepNet::DeepNet(std::vector<Matrix> layers, Activation activation, bool activate_output)
    : layers_(std::move(layers)), activation_(std::move(activation)),
      activate_output_(activate_output) {
  if (layers_.empty()) throw NetworkError("a network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].rows() == 0 || layers_[k].cols() == 0)
      throw NetworkError("layer " + std::to_string(k + 1) + " is empty");
    if (k > 0 && layers_[k].cols() != layers_[k - 1].rows()) {
      throw NetworkError("layer " + std::to_string(k + 1) + " has " +
                         std::to_string(layers_[k].cols()) + " columns but layer " +
                         std::to_string(k) + " has " + std::to_string(layers_[k - 1].rows()) +
                         " rows");
    }
    for (double v : layers_[k].data())
      if (!std::isfinite(v))
        throw NetworkError("layer " + std::to_string(k + 1) + " has a non-finite weight");
  }
  if (activation_.kind == ActivationKind::smoothed_relu && !(activation_.epsilon > 0.0))
    throw NetworkError("smoothed_relu needs epsilon > 0");
  if (activation_.kind == ActivationKind::polynomial && activation_.coefficients.empty())
    throw NetworkError("polynomial activation needs coefficients");
}

DeepNet DeepNet::random(std::span<const std::size_t> widths, Activation activation, Rng& rng,
                        double scale) {
  if (widths.size() < 2) throw NetworkError("need at least input and output widths");
  std::vector<Matrix> layers;
  for (std::size_t k = 1; k < widths.size(); ++k) {
    const double sd = scale / std::sqrt(static_cast<double>(widths[k - 1]));
    layers.push_back(rng.normal_matrix(widths[k], widths[k - 1], sd));
  }
  return DeepNet(std::move(layers), std::move(activation));
}

std::size_t DeepNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : layers_) n += w.size();
  return n;
}

Vector flatten(const std::vector<Matrix>& layers) {
  Vector out;
  for (const auto& w : layers) out.insert(out.end(), w.data().begin(), w.data().end());
  return out;
}

Vector flatten(const DeepNet& net) { return flatten(net.layers()); }

std::vector<Matrix> unflatten_like(const DeepNet& shape, std::span<const double> params) {
  if (params.size() != shape.parameter_count()) {
    throw NetworkError("parameter vector has " + std::to_string(params.size()) +
                       " entries, network has " + std::to_string(shape.parameter_count()));
  }
  std::vector<Matrix> out;
  std::size_t off = 0;
  for (const auto& w : shape.layers()) {
    out.emplace_back(w.rows(), w.cols(),
                     std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(off),
                                         params.begin() + static_cast<std::ptrdiff_t>(off + w.size())));
    off += w.size();
  }
  return out;
}

Vector forward_vector(const DeepNet& net, std::span<const double> x) {
  return run_forward(net, x).post.back();
}

double forward(const DeepNet& net, std::span<const double> x) {
  if (net.output_dim() != 1) {
    throw NetworkError("scalar forward on a net with " + std::to_string(net.output_dim()) +
                       " outputs");
  }
  return forward_vector(net, x)[0];
}

LayerGradient backpropagate(const DeepNet& net, std::span<const double> x,
                            std::span<const double> upstream) {
  Vector up(upstream.begin(), upstream.end());
  return backpropagate(net, x, [&](std::span<const double>) { return up; });
}

LayerGradient backpropagate(const DeepNet& net, std::span<const double> x,
                            const std::function<Vector(std::span<const double>)>& upstream_of,
                            Vector* output) {
  const Trace t = run_forward(net, x);
  if (output != nullptr) *output = t.post.back();
  const Vector upstream = upstream_of(t.post.back());
  if (upstream.size() != net.output_dim()) {
    throw NetworkError("upstream gradient has " + std::to_string(upstream.size()) +
                       " entries, output has " + std::to_string(net.output_dim()));
  }
  const auto& act = net.activation();
  const bool is_relu = act.kind == ActivationKind::relu;

  LayerGradient g;
  g.layers.resize(net.depth());
  Vector delta(upstream.begin(), upstream.end());
  for (std::size_t k = net.depth(); k-- > 0;) {
    if (activated(net, k)) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        const double z = t.pre[k][i];
        if (is_relu && z == 0.0) g.hit_kink = true;
        delta[i] *= act.derivative(z);
      }
    }
    std::span<const double> in = k == 0 ? x : std::span<const double>(t.post[k - 1]);
    g.layers[k] = outer(delta, in);
    if (k > 0) delta = matvec_transposed(net.layer(k), delta);
  }
  return g;
}

LayerGradient layer_gradients(const DeepNet& net, std::span<const double> x) {
  if (net.output_dim() != 1) {
    throw NetworkError("layer_gradients needs a single-output net, got " +
                       std::to_string(net.output_dim()) + " outputs");
  }
  const double one = 1.0;
  return backpropagate(net, x, std::span<const double>(&one, 1));
}

std::vector<std::vector<std::uint8_t>> activation_profile(const DeepNet& net,
                                                          std::span<const double> x) {
  const Trace t = run_forward(net, x);
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (!activated(net, k)) break;
    std::vector<std::uint8_t> d(t.pre[k].size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = t.pre[k][i] > 0.0 ? 1 : 0;
    out.push_back(std::move(d));
  }
  return out;
}

double homogeneity_residual(const DeepNet& net, std::span<const double> x, std::size_t k) {
  if (!net.activation().positively_homogeneous()) {
    throw NetworkError(std::string("homogeneity identity needs relu or linear activation, got ") +
                       to_string(net.activation().kind));
  }
  if (k >= net.depth()) {
    throw NetworkError("layer index " + std::to_string(k + 1) + " out of range (depth " +
                       std::to_string(net.depth()) + ")");
  }
  const double f = forward(net, x);
  const auto g = layer_gradients(net, x);
  return std::fabs(frobenius_dot(g.layers[k], net.layer(k)) - f);
}

NormalizedNet normalize_layers(const DeepNet& net) {
  NormalizedNet out;
  std::vector<Matrix> vs;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const double rho = frobenius_norm(net.layer(k));
    if (rho == 0.0) throw NetworkError("layer " + std::to_string(k + 1) + " has zero norm");
    out.scales.push_back(rho);
    vs.push_back(net.layer(k) * (1.0 / rho));
  }
  out.net = net.with_layers(std::move(vs));
  return out;
}

}  // namespace gradflow
