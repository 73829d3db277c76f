// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gradflow {

namespace {

void check_dim(const DeepNet& net) {
  if (net.parameter_count() > kMaxHessianDim) {
    throw SpectrumError("Hessian dimension " + std::to_string(net.parameter_count()) +
                        " exceeds the limit of " + std::to_string(kMaxHessianDim));
  }
}

// Layer index of every flattened coordinate.
std::vector<std::size_t> layer_of_coordinate(const DeepNet& net) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < net.depth(); ++k) out.insert(out.end(), net.layer(k).size(), k);
  return out;
}

Vector flat_gradient(LossKind kind, const DeepNet& shape, std::span<const double> params,
                     const Dataset& data) {
  return flatten(loss_gradient(kind, shape.with_layers(unflatten_like(shape, params)), data).layers);
}

void add_penalty(Matrix& h, const DeepNet& net, std::span<const double> lambdas) {
  if (lambdas.empty()) return;
  if (lambdas.size() != net.depth()) throw SpectrumError("one penalty per layer is required");
  const auto layer = layer_of_coordinate(net);
  for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += 2.0 * lambdas[layer[i]];
}

Vector uniform_lambdas(const DeepNet& net, double lambda) { return Vector(net.depth(), lambda); }

}  // namespace

Matrix hessian(LossKind kind, const DeepNet& net, const Dataset& data,
               std::span<const double> lambdas) {
  check_dim(net);
  const std::size_t d = net.parameter_count();
  Vector p = flatten(net);
  Matrix h(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double orig = p[j];
    const double step = 1e-5 * std::max(1.0, std::fabs(orig));
    p[j] = orig + step;
    const Vector gp = flat_gradient(kind, net, p, data);
    p[j] = orig - step;
    const Vector gm = flat_gradient(kind, net, p, data);
    p[j] = orig;
    for (std::size_t i = 0; i < d; ++i) h(i, j) = (gp[i] - gm[i]) / (2.0 * step);
  }
  const double asym = relative_asymmetry(h);
  if (asym > 1e-4) {
    std::ostringstream os;
    os << "finite-difference Hessian is asymmetric (relative " << asym
       << "); the analytic gradient is suspect";
    throw SpectrumError(os.str());
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double m = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = m;
      h(j, i) = m;
    }
  }
  add_penalty(h, net, lambdas);
  return h;
}

Matrix hessian_second_differences(LossKind kind, const DeepNet& net, const Dataset& data,
                                  std::span<const double> lambdas, double step) {
  check_dim(net);
  const std::size_t d = net.parameter_count();
  Vector p = flatten(net);
  auto f = [&](const Vector& q) { return loss(kind, net.with_layers(unflatten_like(net, q)), data).value; };
  const double f0 = f(p);
  Matrix h(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    const double hi = step * std::max(1.0, std::fabs(p[i]));
    Vector q = p;
    q[i] = p[i] + hi;
    const double fp = f(q);
    q[i] = p[i] - hi;
    const double fm = f(q);
    h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double hj = step * std::max(1.0, std::fabs(p[j]));
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          q = p;
          q[i] += si * hi;
          q[j] += sj * hj;
          acc += si * sj * f(q);
        }
      }
      h(i, j) = acc / (4.0 * hi * hj);
      h(j, i) = h(i, j);
    }
  }
  add_penalty(h, net, lambdas);
  return h;
}

SpectrumReport classify(const Matrix& h, double tol) {
  const auto eig = symmetric_eig(h);
  SpectrumReport r;
  r.eigenvalues = eig.eigenvalues;
  r.tol = tol;
  double radius = 0.0;
  for (double v : r.eigenvalues) radius = std::max(radius, std::fabs(v));
  r.zero_threshold = tol * radius;
  for (double v : r.eigenvalues) {
    if (std::fabs(v) <= r.zero_threshold)
      ++r.n_zero;
    else if (v > 0.0)
      ++r.n_stable;
    else
      ++r.n_unstable;
  }
  return r;
}

std::size_t count_distinct(std::span<const double> eigenvalues, double rel, double zero_tol) {
  double radius = 0.0;
  for (double v : eigenvalues) radius = std::max(radius, std::fabs(v));
  Vector nz;
  for (double v : eigenvalues)
    if (std::fabs(v) > zero_tol * radius) nz.push_back(v);
  std::sort(nz.begin(), nz.end());
  std::size_t count = 0;
  for (std::size_t i = 0; i < nz.size(); ++i)
    if (i == 0 || nz[i] - nz[i - 1] > rel * radius) ++count;
  return count;
}

double regularized_gradient_norm(LossKind kind, const DeepNet& net, const Dataset& data,
                                 double lambda) {
  return flow_velocity(kind, net, data, uniform_lambdas(net, lambda)).speed;
}

DeepNet relax_to_equilibrium(LossKind kind, const DeepNet& net, const Dataset& data, double lambda,
                             const SweepOptions& options) {
  FlowState s;
  s.net = net;
  s.step = options.step;
  s.lambdas = uniform_lambdas(net, lambda);
  StopRule stop;
  stop.kind = StopRule::Kind::gradient_norm_below;
  stop.threshold = options.flow_gradient_tol;
  stop.max_steps = options.max_flow_steps;
  DeepNet cur = run_flow(s, kind, data, stop).final_state.net;

  const Vector lambdas = uniform_lambdas(net, lambda);
  for (std::size_t it = 0; it < options.newton_steps; ++it) {
    const auto v = flow_velocity(kind, cur, data, lambdas);
    if (v.speed <= 1e-14) break;
    const Matrix h = hessian(kind, cur, data, lambdas);
    const auto eig = symmetric_eig(h);
    const Vector g = flatten(v.velocity);  // −∇
    // Newton step δ = H⁻¹(−∇), restricted to well-conditioned directions.
    const double cutoff = 1e-12 * std::fabs(eig.eigenvalues.front());
    Vector delta(g.size(), 0.0);
    for (std::size_t i = 0; i < eig.eigenvalues.size(); ++i) {
      const double mu = eig.eigenvalues[i];
      if (std::fabs(mu) <= cutoff) continue;
      const Vector q = eig.eigenvectors.column(i);
      const double c = dot(q, g) / mu;
      for (std::size_t j = 0; j < delta.size(); ++j) delta[j] += c * q[j];
    }
    // Along the weakly curved (≈2λ) directions the full step can overshoot;
    // halve it until the gradient norm drops.
    const Vector base = flatten(cur);
    bool improved = false;
    for (double scale = 1.0; scale >= 1.0 / 64.0 && !improved; scale *= 0.5) {
      Vector p = base;
      for (std::size_t j = 0; j < p.size(); ++j) p[j] += scale * delta[j];
      DeepNet next = cur.with_layers(unflatten_like(cur, p));
      if (flow_velocity(kind, next, data, lambdas).speed < v.speed) {
        cur = std::move(next);
        improved = true;
      }
    }
    if (!improved) break;
  }
  return cur;
}

std::vector<SweepEntry> hyperbolicity_sweep(LossKind kind, const DeepNet& net, const Dataset& data,
                                            std::span<const double> lambda_list,
                                            const SweepOptions& options) {
  std::vector<SweepEntry> out;
  for (double lambda : lambda_list) {
    if (!(lambda >= 0.0)) throw SpectrumError("penalties must be ≥ 0");
    SweepEntry e;
    e.lambda = lambda;
    e.equilibrium = options.relax && lambda > 0.0
                        ? relax_to_equilibrium(kind, net, data, lambda, options)
                        : net;
    e.gradient_norm = regularized_gradient_norm(kind, e.equilibrium, data, lambda);
    if (e.gradient_norm > options.equilibrium_tol) {
      std::ostringstream os;
      os << "not an equilibrium at lambda=" << lambda << ": gradient norm " << e.gradient_norm;
      e.warning = os.str();
    }
    const Vector lambdas = uniform_lambdas(net, lambda);
    e.report = classify(hessian(kind, e.equilibrium, data, lambdas), options.tol);
    out.push_back(std::move(e));
  }
  return out;
}

Dataset virtual_linear_system(const DeepNet& net, const Dataset& data) {
  data.validate();
  if (net.output_dim() != 1) throw SpectrumError("the virtual system needs a scalar-output net");
  Dataset out;
  out.task = data.task == TaskKind::multiclass ? TaskKind::regression : data.task;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double r = data.labels[n] - forward(net, data.inputs[n]);
    if (std::fabs(r) > 1e-6) {
      std::ostringstream os;
      os << "sample " << n << " has residual " << r << "; the virtual system needs a zero-loss minimum";
      throw SpectrumError(os.str());
    }
    out.inputs.push_back(flatten(layer_gradients(net, data.inputs[n]).layers));
    out.labels.push_back(data.labels[n]);
  }
  return out;
}

Matrix virtual_hessian(const Dataset& virtual_data, double lambda) {
  const std::size_t d = virtual_data.dim();
  Matrix h(d, d);
  for (const auto& x : virtual_data.inputs)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) h(i, j) += 2.0 * x[i] * x[j];
  for (std::size_t i = 0; i < d; ++i) h(i, i) += 2.0 * lambda;
  return h;
}

ConjugacyVerdict conjugacy_compare(const Matrix& h_a, const Matrix& h_b, double tol) {
  ConjugacyVerdict v;
  v.a = classify(h_a, tol);
  v.b = classify(h_b, tol);
  const bool same_dim = h_a.rows() == h_b.rows();
  v.topologically_conjugate = v.a.n_stable == v.b.n_stable && v.a.n_unstable == v.b.n_unstable &&
                              (!same_dim || v.a.n_zero == v.b.n_zero);
  if (!same_dim) return v;

  double radius = 0.0;
  for (double e : v.a.eigenvalues) radius = std::max(radius, std::fabs(e));
  for (double e : v.b.eigenvalues) radius = std::max(radius, std::fabs(e));
  bool match = true;
  for (std::size_t i = 0; i < v.a.eigenvalues.size(); ++i)
    match = match && std::fabs(v.a.eigenvalues[i] - v.b.eigenvalues[i]) <= tol * radius;
  v.differentiably_conjugate_candidate = match && v.topologically_conjugate;

  if (v.topologically_conjugate) {
    // Both lists are descending, so equal sign counts pair the stable block
    // first and the unstable block last.
    Vector ratios;
    auto pair = [&](std::size_t begin, std::size_t count) {
      for (std::size_t i = begin; i < begin + count; ++i)
        ratios.push_back(v.b.eigenvalues[i] / v.a.eigenvalues[i]);
    };
    pair(0, v.a.n_stable);
    pair(v.a.n_stable + v.a.n_zero, v.a.n_unstable);
    v.exponent_map = std::move(ratios);
  }
  return v;
}

bool takeuchi_condition(std::span<const std::size_t> widths, std::size_t samples) {
  if (widths.size() < 2) throw SpectrumError("widths need an input and at least one layer");
  std::size_t params = 0;
  for (std::size_t k = 1; k < widths.size(); ++k) params += widths[k] * widths[k - 1];
  return params > samples * widths.back();
}

}  // namespace gradflow
