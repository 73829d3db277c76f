// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Integrators for the gradient dynamical systems:
//   * plain and regularized flow   Ẇ_k = −∇_{W_k}L − 2λ_k W_k
//   * scale/direction flow         W_k = ρ_k V_k with ‖V_k‖_F = 1
//   * one-layer direction flow     (‖w‖, w̃) for the exponential loss
//   * repeated perturbation followed by re-convergence
//   * the equal-scale weight growth law for a single sample.
//
// A single flow is sequential; distinct flows share nothing.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradflow/linalg.hpp"
#include "gradflow/losses.hpp"
#include "gradflow/network.hpp"

namespace gradflow {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Integrator { euler, rk4 };

// fixed: h = step. inverse_loss: h = min(step / L(W), max_step), which keeps
// h·λ_max(∇²L) bounded for exponential-tail losses whose curvature decays with
// the loss, so long flow times are reachable in few steps.
enum class StepRule { fixed, inverse_loss };

const char* to_string(Integrator v);
const char* to_string(StepRule v);
Integrator integrator_from_string(const std::string& s);
StepRule step_rule_from_string(const std::string& s);

struct FlowState {
  DeepNet net;
  double time = 0.0;
  double step = 1e-2;
  Vector lambdas;  // per layer, λ_k ≥ 0; empty means all zero
  std::uint64_t rng_seed = 0;
  Integrator integrator = Integrator::euler;
  StepRule step_rule = StepRule::fixed;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t steps_taken = 0;
};

// Velocity field at W for the λ-regularized objective L(W) + Σ_k λ_k‖W_k‖².
struct FlowVelocity {
  double loss = 0.0;
  double objective = 0.0;
  std::vector<Matrix> velocity;  // −∇L − 2λW
  double speed = 0.0;            // ‖velocity‖ over all layers
  bool overflow = false;
  bool hit_kink = false;
};

FlowVelocity flow_velocity(LossKind kind, const DeepNet& net, const Dataset& data,
                           std::span<const double> lambdas = {});

// One integrator step. Throws FlowError when the objective grows more than
// tenfold in a step.
FlowState flow_step(const FlowState& state, LossKind kind, const Dataset& data);

struct StopRule {
  enum class Kind { max_time, loss_below, gradient_norm_below, direction_converged };
  Kind kind = Kind::max_time;
  // loss / gradient-norm threshold, or angle in radians for direction_converged
  // (angle between W/‖W‖ at t and at 2t).
  double threshold = 0.0;
  double max_time = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 1'000'000;
};

const char* to_string(StopRule::Kind v);
StopRule::Kind stop_kind_from_string(const std::string& s);

// When to append a record: every `every_steps` steps, and/or whenever the
// time passes the next point of a geometric grid with the given ratio.
struct RecordCadence {
  std::size_t every_steps = 0;
  double geometric_ratio = 0.0;
};

// Optional quantities for trace records; absent ones are written as NaN.
struct TraceProbe {
  const Dataset* test = nullptr;
  // Compared with the flattened weights (cosine).
  std::optional<Vector> reference_direction;
  // d×d projector onto the data null space, applied to flattened weights.
  std::optional<Matrix> null_projector;
  // w̃ for the residual ‖w(t) − w̃·log t‖ of exponential-loss linear runs.
  std::optional<Vector> log_direction;
};

struct TrajectoryRecord {
  double time = 0.0;
  double loss = 0.0;
  double train_error = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();
  Vector layer_norms;
  double margin_cosine = std::numeric_limits<double>::quiet_NaN();
  double nullspace_norm = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = std::numeric_limits<double>::quiet_NaN();
  std::size_t perturbation_count = 0;
};

struct TrajectoryTrace {
  std::vector<TrajectoryRecord> records;
  FlowState final_state;
  bool converged = false;
  std::string stop_reason;
  bool overflow = false;
  bool hit_kink = false;
  // Perturbation runs: cycles that did not re-converge within budget.
  std::size_t flagged_cycles = 0;
};

TrajectoryRecord make_record(const FlowState& state, LossKind kind, const Dataset& data,
                             const TraceProbe& probe, std::size_t perturbation_count = 0);

TrajectoryTrace run_flow(const FlowState& state, LossKind kind, const Dataset& data,
                         const StopRule& stop, const RecordCadence& cadence = {},
                         const TraceProbe& probe = {});

// ---------------------------------------------------------------------------
// Scale/direction system: W_k = ρ_k V_k, exponential loss, binary labels.
//   ρ̇_k = Σₙ (Π_{i≠k}ρᵢ) e^{−Πρᵢ·yₙf̃(xₙ)} yₙf̃(xₙ)
//   V̇_k = B_k − 2λ_k V_k,  B_k = (Πρᵢ) Σₙ e^{−Πρᵢ·yₙf̃(xₙ)} yₙ ∂f̃(xₙ)/∂V_k
// In constraint mode λ_k is solved every step so that ‖V_k‖ stays exactly 1;
// in fixed mode λ_k is given and drift beyond 1e-4 triggers renormalization.
// The inverse_loss step rule here is h = step/(L·max(1, (Πρ)²)).

enum class PenaltyMode { constraint, fixed };

struct NormalizedFlowState {
  Vector rhos;
  DeepNet vs;  // unit-Frobenius layers
  Vector lambdas;
  PenaltyMode mode = PenaltyMode::constraint;
  double time = 0.0;
  double step = 1e-2;
  StepRule step_rule = StepRule::fixed;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t renormalizations = 0;
  double last_rho_increment = 0.0;  // max_k of h·ρ̇_k in the last step
};

NormalizedFlowState make_normalized_state(const DeepNet& net, double step,
                                          PenaltyMode mode = PenaltyMode::constraint,
                                          Vector lambdas = {});

NormalizedFlowState normalized_flow_step(const NormalizedFlowState& state, const Dataset& data);

// Exponential loss of the scale/direction parametrization.
double normalized_loss(const NormalizedFlowState& state, const Dataset& data);

// ---------------------------------------------------------------------------
// One-layer direction flow for the exponential loss with f̃ₙ = yₙw̃ᵀxₙ:
//   d‖w‖/dt = Σₙ e^{−‖w‖f̃ₙ} f̃ₙ,   dw̃/dt = S·B̃,   S = (I − w̃w̃ᵀ)/‖w‖,
//   B̃ = Σₙ e^{−‖w‖f̃ₙ} yₙxₙ.

struct DirectionFlowState {
  double norm = 1.0;
  Vector direction;  // unit
  double time = 0.0;
  double step = 1e-2;
  StepRule step_rule = StepRule::fixed;
  double max_step = std::numeric_limits<double>::infinity();
};

struct DirectionRecord {
  double time = 0.0;
  double norm = 0.0;
  double norm_rate = 0.0;    // d‖w‖/dt
  double direction_speed = 0.0;  // ‖dw̃/dt‖
  double projector_residual = 0.0;  // ‖S·w̃‖
  double unit_error = 0.0;          // |‖w̃‖ − 1| of the recorded state
  double euler_drift = 0.0;         // |‖w̃ + h·w̃̇‖ − 1| before re-projection
  Vector direction;
};

struct DirectionTrace {
  std::vector<DirectionRecord> records;
  DirectionFlowState final_state;
};

// Throws FlowError if some yₙw̃ᵀxₙ ≤ 0.
DirectionFlowState direction_flow_step(const DirectionFlowState& state, const Dataset& data,
                                       DirectionRecord* record = nullptr);

DirectionTrace normalized_direction_flow(const Vector& w0, const Dataset& data, double step,
                                         StepRule rule, double t_end, std::size_t max_steps,
                                         const RecordCadence& cadence);

// ---------------------------------------------------------------------------
// Perturbation protocol.

enum class NoiseScale { absolute, relative_to_layer_std };

struct PerturbationProtocol {
  double noise_std = 0.45;
  NoiseScale scale = NoiseScale::absolute;
  // false: the whole perturbation vector is rescaled to norm noise_std.
  bool per_coordinate = true;
  std::size_t interval = 1000;        // flow steps between perturbations
  std::size_t stop_after = 0;         // no perturbation at or after this step index; 0 = never stop
  std::size_t repetitions = 10;       // number of cycles
  double reconverge_tolerance = 0.0;  // train error at cycle end; 0 = zero classification error
  // Extra steps allowed beyond `interval` to reach the tolerance.
  std::size_t reconverge_budget = 0;
  // End a cycle early once the tolerance is met, checked every 1000 steps
  // starting at step 1000.
  bool early_exit = false;
};

// Adds noise to every layer in place; returns the perturbation for each layer.
std::vector<Matrix> perturb_layers(std::vector<Matrix>& layers, const PerturbationProtocol& p,
                                   Rng& rng);

// One record per cycle end (plus the initial state). Uses state.rng_seed.
TrajectoryTrace perturb_and_reconverge(const FlowState& state, const PerturbationProtocol& protocol,
                                       LossKind kind, const Dataset& data,
                                       const TraceProbe& probe = {});

// ---------------------------------------------------------------------------
// Single-sample weight growth.

struct GrowthSample {
  double time = 0.0;
  Vector rhos;
  double product = 0.0;
};

struct GrowthRun {
  std::vector<GrowthSample> samples;
  std::size_t step_halvings = 0;
};

// Equal-scale law ρ̇ = f̃Kρ^{K−1}e^{−ρᴷf̃} by fixed-step RK4 from t = 0.
GrowthRun integrate_equal_scale_growth(int layers, double f_tilde, double rho0,
                                       std::span<const double> sample_times, double step);

// Coupled scales ρ̇_k = (Π_{i≠k}ρᵢ) f̃ e^{−Πρᵢ f̃} (one sample) by fixed-step RK4.
GrowthRun integrate_coupled_scale_growth(const Vector& rho0, double f_tilde,
                                         std::span<const double> sample_times, double step);

}  // namespace gradflow
