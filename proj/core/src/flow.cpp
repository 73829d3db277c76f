// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradflow/random.hpp"

namespace gradflow {

const char* to_string(Integrator v) { return v == Integrator::euler ? "euler" : "rk4"; }
const char* to_string(StepRule v) { return v == StepRule::fixed ? "fixed" : "inverse_loss"; }

Integrator integrator_from_string(const std::string& s) {
  if (s == "euler") return Integrator::euler;
  if (s == "rk4") return Integrator::rk4;
  throw FlowError("unknown integrator '" + s + "'");
}

StepRule step_rule_from_string(const std::string& s) {
  if (s == "fixed") return StepRule::fixed;
  if (s == "inverse_loss") return StepRule::inverse_loss;
  throw FlowError("unknown step rule '" + s + "'");
}

const char* to_string(StopRule::Kind v) {
  switch (v) {
    case StopRule::Kind::max_time:
      return "max_time";
    case StopRule::Kind::loss_below:
      return "loss_below";
    case StopRule::Kind::gradient_norm_below:
      return "gradient_norm_below";
    case StopRule::Kind::direction_converged:
      return "direction_converged";
  }
  return "unknown";
}

StopRule::Kind stop_kind_from_string(const std::string& s) {
  if (s == "max_time") return StopRule::Kind::max_time;
  if (s == "loss_below") return StopRule::Kind::loss_below;
  if (s == "gradient_norm_below") return StopRule::Kind::gradient_norm_below;
  if (s == "direction_converged") return StopRule::Kind::direction_converged;
  throw FlowError("unknown stop rule '" + s + "'");
}

namespace {

double lambda_at(std::span<const double> lambdas, std::size_t k) {
  return lambdas.empty() ? 0.0 : lambdas[k];
}

void check_lambdas(std::span<const double> lambdas, std::size_t depth) {
  if (!lambdas.empty() && lambdas.size() != depth) {
    throw FlowError("got " + std::to_string(lambdas.size()) + " penalties for " +
                    std::to_string(depth) + " layers");
  }
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw FlowError("penalties must be finite and ≥ 0");
}

// Evaluates the velocity field. Single-layer scalar-output nets are linear in
// x, so f = Xw and ∇L = Xᵀ(dℓ/df) can be formed without per-sample backprop.
class VelocityField {
 public:
  VelocityField(const DeepNet& shape, LossKind kind, const Dataset& data, Vector lambdas)
      : shape_(shape), kind_(kind), data_(data), lambdas_(std::move(lambdas)) {
    data_.validate();
    check_compatible(kind, data_);
    check_lambdas(lambdas_, shape.depth());
    const bool linear_readout = !shape.activate_output() ||
                                shape.activation().kind == ActivationKind::linear;
    fast_ = shape.depth() == 1 && shape.output_dim() == 1 && linear_readout &&
            kind != LossKind::softmax_cross_entropy;
    if (fast_) {
      if (data_.dim() != shape.input_dim()) {
        throw DataError("inputs have dimension " + std::to_string(data_.dim()) + ", net expects " +
                        std::to_string(shape.input_dim()));
      }
      x_ = data_.data_matrix();
    }
  }

  FlowVelocity operator()(const std::vector<Matrix>& layers) const {
    FlowVelocity out;
    if (fast_) {
      const auto& w = layers[0].data();
      Vector slope(x_.rows());
      for (std::size_t n = 0; n < x_.rows(); ++n) {
        const auto s = scalar_sample_loss(kind_, dot(x_.row(n), w), data_.labels[n], out.overflow);
        out.loss += s.value;
        slope[n] = s.slope;
      }
      Matrix g(1, x_.cols(), matvec_transposed(x_, slope));
      out.velocity.push_back(std::move(g));
    } else {
      auto g = loss_gradient(kind_, shape_.with_layers(layers), data_);
      out.loss = g.loss;
      out.overflow = g.overflow;
      out.hit_kink = g.hit_kink;
      out.velocity = std::move(g.layers);
    }
    out.objective = out.loss;
    double sq = 0.0;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const double lam = lambda_at(lambdas_, k);
      auto& v = out.velocity[k].data();
      const auto& w = layers[k].data();
      double wsq = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = -v[i] - 2.0 * lam * w[i];
        sq += v[i] * v[i];
        wsq += w[i] * w[i];
      }
      out.objective += lam * wsq;
    }
    out.speed = std::sqrt(sq);
    return out;
  }

 private:
  const DeepNet& shape_;
  LossKind kind_;
  const Dataset& data_;
  Vector lambdas_;
  bool fast_ = false;
  Matrix x_;
};

std::vector<Matrix> axpy(const std::vector<Matrix>& w, double h, const std::vector<Matrix>& v) {
  std::vector<Matrix> out = w;
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& o = out[k].data();
    const auto& d = v[k].data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += h * d[i];
  }
  return out;
}

// Owns the state of one flow and caches the velocity at the current weights
// so each Euler step costs one evaluation.
class Stepper {
 public:
  Stepper(const FlowState& s, LossKind kind, const Dataset& data)
      : state_(s), field_(state_.net, kind, data, s.lambdas), layers_(s.net.layers()) {
    if (!(s.step > 0.0) || !std::isfinite(s.step)) throw FlowError("step must be positive");
    current_ = field_(layers_);
    if (!std::isfinite(current_.objective)) throw FlowError("initial objective is not finite");
    overflow_ = current_.overflow;
    kink_ = current_.hit_kink;
  }

  const FlowVelocity& current() const { return current_; }
  const std::vector<Matrix>& layers() const { return layers_; }
  bool overflow() const { return overflow_; }
  bool hit_kink() const { return kink_; }

  void set_layers(std::vector<Matrix> layers) {
    layers_ = std::move(layers);
    current_ = field_(layers_);
    overflow_ = overflow_ || current_.overflow;
    kink_ = kink_ || current_.hit_kink;
  }

  double next_step_size(double time_limit) const {
    double h = state_.step;
    if (state_.step_rule == StepRule::inverse_loss) {
      h = current_.loss > 0.0 ? std::min(state_.step / current_.loss, state_.max_step)
                              : state_.max_step;
      if (!std::isfinite(h)) throw FlowError("inverse-loss step needs a finite max_step at zero loss");
    }
    return std::min(h, time_limit - state_.time);
  }

  void advance(double time_limit = std::numeric_limits<double>::infinity()) {
    const double h = next_step_size(time_limit);
    std::vector<Matrix> next;
    if (state_.integrator == Integrator::euler) {
      next = axpy(layers_, h, current_.velocity);
    } else {
      const auto& k1 = current_.velocity;
      const auto k2 = field_(axpy(layers_, 0.5 * h, k1)).velocity;
      const auto k3 = field_(axpy(layers_, 0.5 * h, k2)).velocity;
      const auto k4 = field_(axpy(layers_, h, k3)).velocity;
      next = layers_;
      for (std::size_t k = 0; k < next.size(); ++k) {
        auto& o = next[k].data();
        for (std::size_t i = 0; i < o.size(); ++i) {
          o[i] += h / 6.0 *
                  (k1[k].data()[i] + 2.0 * k2[k].data()[i] + 2.0 * k3[k].data()[i] +
                   k4[k].data()[i]);
        }
      }
    }
    FlowVelocity nv = field_(next);
    const double before = current_.objective;
    if (!std::isfinite(nv.objective) || (nv.objective > 10.0 * before && nv.objective > 1e-300)) {
      std::ostringstream os;
      os << "objective grew from " << before << " to " << nv.objective << " in one step at t="
         << state_.time << " (h=" << h << "); reduce the step";
      throw FlowError(os.str());
    }
    layers_ = std::move(next);
    current_ = std::move(nv);
    overflow_ = overflow_ || current_.overflow;
    kink_ = kink_ || current_.hit_kink;
    state_.time += h;
    ++state_.steps_taken;
  }

  FlowState state() const {
    FlowState s = state_;
    s.net = state_.net.with_layers(layers_);
    return s;
  }
  double time() const { return state_.time; }
  std::size_t steps() const { return state_.steps_taken; }

 private:
  FlowState state_;
  VelocityField field_;
  std::vector<Matrix> layers_;
  FlowVelocity current_;
  bool overflow_ = false;
  bool kink_ = false;
};

TrajectoryRecord record_with_loss(const FlowState& state, double loss_value, const Dataset& data,
                                  const TraceProbe& probe, std::size_t perturbation_count) {
  const DeepNet& net = state.net;
  TrajectoryRecord r;
  r.time = state.time;
  r.loss = loss_value;
  r.train_error = classification_error(net, data);
  if (probe.test) r.test_error = classification_error(net, *probe.test);
  for (const auto& w : net.layers()) r.layer_norms.push_back(frobenius_norm(w));
  const std::size_t p = net.parameter_count();
  const bool need_flat = probe.reference_direction || probe.null_projector || probe.log_direction;
  const Vector w = need_flat ? flatten(net) : Vector{};
  if (probe.reference_direction && probe.reference_direction->size() == p)
    r.margin_cosine = cosine(w, *probe.reference_direction);
  if (probe.null_projector && probe.null_projector->rows() == p)
    r.nullspace_norm = norm2(matvec(*probe.null_projector, w));
  if (probe.log_direction && probe.log_direction->size() == p && state.time > 0.0) {
    const double lt = std::log(state.time);
    Vector d = w;
    for (std::size_t i = 0; i < p; ++i) d[i] -= (*probe.log_direction)[i] * lt;
    r.residual_norm = norm2(d);
  }
  r.perturbation_count = perturbation_count;
  return r;
}

Vector unit(Vector v) {
  const double n = norm2(v);
  if (n > 0.0)
    for (double& e : v) e /= n;
  return v;
}

}  // namespace

FlowVelocity flow_velocity(LossKind kind, const DeepNet& net, const Dataset& data,
                           std::span<const double> lambdas) {
  VelocityField field(net, kind, data, Vector(lambdas.begin(), lambdas.end()));
  return field(net.layers());
}

FlowState flow_step(const FlowState& state, LossKind kind, const Dataset& data) {
  Stepper st(state, kind, data);
  st.advance();
  return st.state();
}

TrajectoryRecord make_record(const FlowState& state, LossKind kind, const Dataset& data,
                             const TraceProbe& probe, std::size_t perturbation_count) {
  return record_with_loss(state, loss(kind, state.net, data).value, data, probe,
                          perturbation_count);
}

TrajectoryTrace run_flow(const FlowState& state, LossKind kind, const Dataset& data,
                         const StopRule& stop, const RecordCadence& cadence,
                         const TraceProbe& probe) {
  Stepper st(state, kind, data);
  TrajectoryTrace trace;
  auto record = [&] {
    trace.records.push_back(record_with_loss(st.state(), st.current().loss, data, probe, 0));
  };
  record();

  const double ratio = cadence.geometric_ratio;
  double next_geo = ratio > 1.0 ? (st.time() > 0.0 ? st.time() * ratio : state.step)
                                : std::numeric_limits<double>::infinity();
  double checkpoint_time = -1.0;
  Vector checkpoint_dir;

  while (true) {
    const auto& v = st.current();
    if (stop.kind == StopRule::Kind::loss_below && v.loss <= stop.threshold) {
      trace.converged = true;
      trace.stop_reason = "loss_below";
      break;
    }
    if (stop.kind == StopRule::Kind::gradient_norm_below && v.speed <= stop.threshold) {
      trace.converged = true;
      trace.stop_reason = "gradient_norm_below";
      break;
    }
    if (st.time() >= stop.max_time) {
      trace.converged = stop.kind == StopRule::Kind::max_time;
      trace.stop_reason = "max_time";
      break;
    }
    if (st.steps() - state.steps_taken >= stop.max_steps) {
      trace.stop_reason = "max_steps";
      break;
    }

    st.advance(stop.max_time);

    const std::size_t taken = st.steps() - state.steps_taken;
    bool due = cadence.every_steps > 0 && taken % cadence.every_steps == 0;
    if (st.time() >= next_geo) {
      due = true;
      while (next_geo <= st.time()) next_geo *= ratio;
    }
    if (due) record();

    if (stop.kind == StopRule::Kind::direction_converged) {
      Vector dir = unit(flatten(st.layers()));
      if (checkpoint_time <= 0.0) {
        checkpoint_time = st.time();
        checkpoint_dir = std::move(dir);
      } else if (st.time() >= 2.0 * checkpoint_time) {
        const double c = std::clamp(dot(dir, checkpoint_dir), -1.0, 1.0);
        if (std::acos(c) < stop.threshold) {
          trace.converged = true;
          trace.stop_reason = "direction_converged";
          break;
        }
        checkpoint_time = st.time();
        checkpoint_dir = std::move(dir);
      }
    }
  }
  if (trace.records.back().time != st.time()) record();
  trace.final_state = st.state();
  trace.overflow = st.overflow();
  trace.hit_kink = st.hit_kink();
  return trace;
}

// ---------------------------------------------------------------------------

NormalizedFlowState make_normalized_state(const DeepNet& net, double step, PenaltyMode mode,
                                          Vector lambdas) {
  if (!net.activation().positively_homogeneous())
    throw FlowError("the scale/direction system needs a relu or linear net");
  check_lambdas(lambdas, net.depth());
  auto nn = normalize_layers(net);
  NormalizedFlowState s;
  s.rhos = std::move(nn.scales);
  s.vs = std::move(nn.net);
  s.lambdas = lambdas.empty() ? Vector(net.depth(), 0.0) : std::move(lambdas);
  s.mode = mode;
  s.step = step;
  return s;
}

namespace {

double product(std::span<const double> v) {
  double p = 1.0;
  for (double e : v) p *= e;
  return p;
}

double product_except(std::span<const double> v, std::size_t k) {
  double p = 1.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i != k) p *= v[i];
  return p;
}

void check_normalized_inputs(const NormalizedFlowState& s, const Dataset& data) {
  data.validate();
  if (data.task != TaskKind::binary) throw FlowError("the scale/direction system needs binary labels");
  if (s.vs.output_dim() != 1) throw FlowError("the scale/direction system needs a scalar output");
  if (s.rhos.size() != s.vs.depth()) throw FlowError("one scale per layer is required");
  for (double r : s.rhos)
    if (!(r > 0.0)) throw FlowError("layer scales must be positive");
}

}  // namespace

double normalized_loss(const NormalizedFlowState& state, const Dataset& data) {
  check_normalized_inputs(state, data);
  const double p = product(state.rhos);
  bool overflow = false;
  double l = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n)
    l += scalar_sample_loss(LossKind::exponential, p * forward(state.vs, data.inputs[n]),
                            data.labels[n], overflow)
             .value;
  return l;
}

NormalizedFlowState normalized_flow_step(const NormalizedFlowState& state, const Dataset& data) {
  check_normalized_inputs(state, data);
  const std::size_t depth = state.vs.depth();
  const double p = product(state.rhos);

  Vector rhodot(depth, 0.0);
  std::vector<Matrix> b;
  for (const auto& v : state.vs.layers()) b.emplace_back(v.rows(), v.cols());
  double total = 0.0;
  bool overflow = false;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double y = data.labels[n];
    Vector out;
    double e = 0.0;
    auto g = backpropagate(
        state.vs, data.inputs[n],
        [&](std::span<const double> f) {
          e = scalar_sample_loss(LossKind::exponential, p * f[0], y, overflow).value;
          return Vector{p * e * y};
        },
        &out);
    total += e;
    const double margin = y * out[0];
    for (std::size_t k = 0; k < depth; ++k) {
      rhodot[k] += product_except(state.rhos, k) * e * margin;
      b[k] += g.layers[k];
    }
  }

  // The V-block curvature scales like (Πρ)²·L, so the loss-scaled step is
  // divided by that factor too.
  double h = state.step;
  if (state.step_rule == StepRule::inverse_loss) {
    const double curv = total * std::max(1.0, p * p);
    h = curv > 0.0 ? std::min(state.step / curv, state.max_step) : state.max_step;
  }
  if (!(h > 0.0) || !std::isfinite(h)) throw FlowError("invalid step in scale/direction flow");

  NormalizedFlowState next = state;
  next.last_rho_increment = 0.0;
  std::vector<Matrix> vs = state.vs.layers();
  for (std::size_t k = 0; k < depth; ++k) {
    next.rhos[k] += h * rhodot[k];
    if (!(next.rhos[k] > 0.0)) {
      std::ostringstream os;
      os << "scale of layer " << k + 1 << " would become " << next.rhos[k] << " at t=" << state.time
         << "; reduce the step";
      throw FlowError(os.str());
    }
    next.last_rho_increment = std::max(next.last_rho_increment, h * rhodot[k]);
    Matrix& v = vs[k];
    const double s = frobenius_dot(v, v);
    const double vb = frobenius_dot(v, b[k]);
    const double bb = frobenius_dot(b[k], b[k]);
    if (state.mode == PenaltyMode::constraint) {
      // ‖aV + hB‖ = 1 with a = 1 − 2hλ.
      const double disc = h * h * vb * vb - s * (h * h * bb - 1.0);
      if (disc >= 0.0) {
        const double a = (-h * vb + std::sqrt(disc)) / s;
        next.lambdas[k] = (1.0 - a) / (2.0 * h);
        v *= a;
        v += h * b[k];
      } else {
        v += h * b[k];
        v *= 1.0 / frobenius_norm(v);
        ++next.renormalizations;
      }
    } else {
      v *= 1.0 - 2.0 * h * state.lambdas[k];
      v += h * b[k];
      const double nv = frobenius_norm(v);
      if (std::fabs(nv - 1.0) > 1e-4) {
        v *= 1.0 / nv;
        ++next.renormalizations;
      }
    }
  }
  next.vs = state.vs.with_layers(std::move(vs));
  next.time += h;
  return next;
}

// ---------------------------------------------------------------------------

DirectionFlowState direction_flow_step(const DirectionFlowState& state, const Dataset& data,
                                       DirectionRecord* record) {
  if (data.task != TaskKind::binary) throw FlowError("the direction flow needs binary labels");
  const std::size_t d = state.direction.size();
  if (data.dim() != d) throw FlowError("direction and inputs differ in dimension");
  const double r = state.norm;

  double rate = 0.0;
  double total = 0.0;
  Vector bt(d, 0.0);
  bool overflow = false;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double y = data.labels[n];
    const double ft = y * dot(state.direction, data.inputs[n]);
    if (!(ft > 0.0)) {
      std::ostringstream os;
      os << "sample " << n << " has yw̃ᵀx = " << ft << " ≤ 0 at t=" << state.time;
      throw FlowError(os.str());
    }
    const double e = scalar_sample_loss(LossKind::exponential, r * ft, 1.0, overflow).value;
    total += e;
    rate += e * ft;
    for (std::size_t j = 0; j < d; ++j) bt[j] += e * y * data.inputs[n][j];
  }
  // S·B̃ = (B̃ − w̃⟨w̃, B̃⟩)/‖w‖
  const double wb = dot(state.direction, bt);
  const double ww = dot(state.direction, state.direction);
  Vector sb(d);
  double proj_res = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    sb[j] = (bt[j] - state.direction[j] * wb) / r;
    const double sw = (state.direction[j] - state.direction[j] * ww) / r;
    proj_res += sw * sw;
  }

  double h = state.step;
  if (state.step_rule == StepRule::inverse_loss)
    h = total > 0.0 ? std::min(state.step / total, state.max_step) : state.max_step;
  if (!(h > 0.0) || !std::isfinite(h)) throw FlowError("invalid step in direction flow");

  DirectionFlowState next = state;
  next.norm = r + h * rate;
  for (std::size_t j = 0; j < d; ++j) next.direction[j] += h * sb[j];
  const double nn = norm2(next.direction);
  for (double& e : next.direction) e /= nn;
  next.time += h;

  if (record) {
    record->time = state.time;
    record->norm = r;
    record->norm_rate = rate;
    record->direction_speed = norm2(sb);
    record->projector_residual = std::sqrt(proj_res);
    record->unit_error = std::fabs(norm2(state.direction) - 1.0);
    record->euler_drift = std::fabs(nn - 1.0);
    record->direction = state.direction;
  }
  return next;
}

DirectionTrace normalized_direction_flow(const Vector& w0, const Dataset& data, double step,
                                         StepRule rule, double t_end, std::size_t max_steps,
                                         const RecordCadence& cadence) {
  data.validate();
  const double n0 = norm2(w0);
  if (!(n0 > 0.0)) throw FlowError("the direction flow needs a nonzero initial w");
  DirectionFlowState s;
  s.norm = n0;
  s.direction = unit(w0);
  s.step = step;
  s.step_rule = rule;

  DirectionTrace trace;
  const double ratio = cadence.geometric_ratio;
  double next_geo = ratio > 1.0 ? step : std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  DirectionRecord rec;
  while (s.time < t_end && steps < max_steps) {
    const bool due = steps == 0 ||
                     (cadence.every_steps > 0 && steps % cadence.every_steps == 0) ||
                     s.time >= next_geo;
    s = direction_flow_step(s, data, &rec);
    ++steps;
    if (due) {
      trace.records.push_back(rec);
      while (next_geo <= rec.time) next_geo *= ratio;
    }
  }
  // Final record describes the end state.
  DirectionRecord last;
  direction_flow_step(s, data, &last);
  trace.records.push_back(last);
  trace.final_state = s;
  return trace;
}

// ---------------------------------------------------------------------------

std::vector<Matrix> perturb_layers(std::vector<Matrix>& layers, const PerturbationProtocol& p,
                                   Rng& rng) {
  if (!(p.noise_std >= 0.0)) throw FlowError("noise_std must be ≥ 0");
  std::vector<Matrix> deltas;
  for (auto& w : layers) {
    double sd = p.noise_std;
    if (p.scale == NoiseScale::relative_to_layer_std) {
      const auto& d = w.data();
      double mean = 0.0;
      for (double e : d) mean += e;
      mean /= static_cast<double>(d.size());
      double var = 0.0;
      for (double e : d) var += (e - mean) * (e - mean);
      sd *= std::sqrt(var / static_cast<double>(d.size()));
    }
    Matrix delta = rng.normal_matrix(w.rows(), w.cols(), p.per_coordinate ? sd : 1.0);
    deltas.push_back(std::move(delta));
  }
  if (!p.per_coordinate) {
    // Rescale the whole perturbation to norm σ (absolute) or σ·std per layer.
    double total = 0.0;
    for (const auto& d : deltas) total += frobenius_dot(d, d);
    total = std::sqrt(total);
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      double target = p.noise_std;
      if (p.scale == NoiseScale::relative_to_layer_std) target *= frobenius_norm(layers[k]);
      if (total > 0.0) deltas[k] *= target / total;
    }
  }
  for (std::size_t k = 0; k < layers.size(); ++k) layers[k] += deltas[k];
  return deltas;
}

TrajectoryTrace perturb_and_reconverge(const FlowState& state, const PerturbationProtocol& protocol,
                                       LossKind kind, const Dataset& data,
                                       const TraceProbe& probe) {
  if (protocol.interval == 0) throw FlowError("perturbation interval must be positive");
  Rng rng(state.rng_seed);
  Stepper st(state, kind, data);
  TrajectoryTrace trace;
  std::size_t count = 0;
  auto record = [&] {
    trace.records.push_back(record_with_loss(st.state(), st.current().loss, data, probe, count));
  };
  record();

  auto reconverged = [&] {
    const double err = classification_error(st.state().net, data);
    return protocol.reconverge_tolerance > 0.0 ? err <= protocol.reconverge_tolerance : err == 0.0;
  };
  constexpr std::size_t kCheckEvery = 1000;

  for (std::size_t cycle = 0; cycle < protocol.repetitions; ++cycle) {
    // The schedule stays on the nominal grid cycle·interval even when cycles
    // end early.
    const std::size_t nominal = cycle * protocol.interval;
    if (protocol.stop_after == 0 || nominal < protocol.stop_after) {
      auto layers = st.layers();
      perturb_layers(layers, protocol, rng);
      st.set_layers(std::move(layers));
      ++count;
    }
    bool done = false;
    for (std::size_t i = 0; i < protocol.interval; ++i) {
      // Every cycle flows at least kCheckEvery steps, so record times increase.
      if (protocol.early_exit && i > 0 && i % kCheckEvery == 0 && reconverged()) {
        done = true;
        break;
      }
      st.advance();
    }
    if (!done) done = reconverged();
    for (std::size_t i = 0; !done && i < protocol.reconverge_budget; ++i) {
      st.advance();
      if ((i + 1) % kCheckEvery == 0) done = reconverged();
    }
    if (!done) done = reconverged();
    if (!done) ++trace.flagged_cycles;
    record();
  }
  trace.final_state = st.state();
  trace.overflow = st.overflow();
  trace.hit_kink = st.hit_kink();
  trace.converged = trace.flagged_cycles == 0;
  trace.stop_reason = "cycles";
  return trace;
}

// ---------------------------------------------------------------------------

namespace {

// Fixed-step RK4 whose step is absolute below t = 1 and relative to t above,
// since the growth laws slow down like 1/t. A step producing a non-finite or
// decreasing scale is retried at half size.
template <class Rhs>
GrowthRun integrate_growth(Vector rho, const Rhs& rhs, std::span<const double> sample_times,
                           double step) {
  if (!(step > 0.0)) throw FlowError("growth step must be positive");
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (!(sample_times[i] >= 0.0) || (i > 0 && sample_times[i] < sample_times[i - 1]))
      throw FlowError("growth sample times must be non-negative and ascending");
  }
  GrowthRun run;
  double t = 0.0;
  const std::size_t k = rho.size();
  auto add = [&](const Vector& a, double h, const Vector& b) {
    Vector o(k);
    for (std::size_t i = 0; i < k; ++i) o[i] = a[i] + h * b[i];
    return o;
  };
  for (double target : sample_times) {
    while (t < target) {
      double h = std::min(step * std::max(1.0, t), target - t);
      while (true) {
        const Vector k1 = rhs(rho);
        const Vector k2 = rhs(add(rho, 0.5 * h, k1));
        const Vector k3 = rhs(add(rho, 0.5 * h, k2));
        const Vector k4 = rhs(add(rho, h, k3));
        Vector next(k);
        bool ok = true;
        for (std::size_t i = 0; i < k; ++i) {
          next[i] = rho[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
          ok = ok && std::isfinite(next[i]) && next[i] >= rho[i];
        }
        if (ok) {
          rho = std::move(next);
          t += h;
          break;
        }
        h *= 0.5;
        ++run.step_halvings;
        if (h < 1e-300) throw FlowError("growth integration failed to make progress");
      }
    }
    run.samples.push_back({target, rho, product(rho)});
  }
  return run;
}

}  // namespace

GrowthRun integrate_equal_scale_growth(int layers, double f_tilde, double rho0,
                                       std::span<const double> sample_times, double step) {
  if (layers < 1) throw FlowError("growth law needs at least one layer");
  if (!(f_tilde > 0.0)) throw FlowError("growth law needs f̃ > 0");
  if (!(rho0 >= 0.0)) throw FlowError("growth law needs ρ₀ ≥ 0");
  const double kk = layers;
  auto rhs = [&](const Vector& r) {
    const double p = std::pow(r[0], kk);
    const double e = std::exp(-std::min(p * f_tilde, kExponentClamp));
    return Vector{f_tilde * kk * std::pow(r[0], kk - 1.0) * e};
  };
  auto run = integrate_growth(Vector{rho0}, rhs, sample_times, step);
  for (auto& s : run.samples) s.product = std::pow(s.rhos[0], kk);
  return run;
}

GrowthRun integrate_coupled_scale_growth(const Vector& rho0, double f_tilde,
                                         std::span<const double> sample_times, double step) {
  if (rho0.empty()) throw FlowError("growth law needs at least one layer");
  if (!(f_tilde > 0.0)) throw FlowError("growth law needs f̃ > 0");
  for (double r : rho0)
    if (!(r >= 0.0)) throw FlowError("growth law needs ρ₀ ≥ 0");
  auto rhs = [&](const Vector& r) {
    const double e = std::exp(-std::min(product(r) * f_tilde, kExponentClamp));
    Vector out(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) out[k] = product_except(r, k) * f_tilde * e;
    return out;
  };
  return integrate_growth(rho0, rhs, sample_times, step);
}

}  // namespace gradflow
