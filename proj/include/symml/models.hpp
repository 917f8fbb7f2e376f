#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "symml/autodiff.hpp"
#include "symml/dense_net.hpp"
#include "symml/dynamics.hpp"

namespace symml {

// Values appended to a network input for adaptable models: none, (alpha) or (alpha, beta).
Eigen::VectorXd param_channels(const PotentialParams& params, int n_channels);

struct Derivatives {
    Vec2 qdot = Vec2::Zero();
    Vec2 pdot = Vec2::Zero();
};

// One supervised point for derivative-regression models.
struct DerivativeSample {
    PhaseState state;
    PotentialParams params;
    Vec2 qdot = Vec2::Zero();
    Vec2 pdot = Vec2::Zero();
};

// Ground-truth states for recurrent training: window[0] seeds the rollout, the rest are targets.
struct RolloutWindow {
    std::vector<PhaseState> states;
    PotentialParams params;
};

// Scalar network H(q, p [, params]). Input order (q_x, q_y, p_x, p_y, alpha [, beta]).
struct HnnModel {
    DenseNet net;
    int param_channels = 0;

    bool adaptable() const { return param_channels > 0; }
    void validate() const;
    static HnnModel create(const std::vector<int>& hidden, int param_channels, std::uint64_t seed);
};

// H = K(p) + V(q [, params]). Parameter channels feed the potential only.
// With fixed_kinetic the kinetic net is unused and K = |p|^2 / 2.
struct SeparableModel {
    DenseNet kinetic;
    DenseNet potential;
    int param_channels = 0;
    bool fixed_kinetic = false;

    void validate() const;
    static SeparableModel create(const std::vector<int>& hidden, int param_channels, bool fixed_kinetic,
                                 std::uint64_t seed);

    // Trainable parameters: kinetic block (absent when fixed) followed by the potential block.
    std::size_t param_count() const;
    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> flat);

    Vec2 grad_v(const Vec2& q, const PotentialParams& params) const;
    Vec2 grad_k(const Vec2& p) const;
    double energy(const PhaseState& s, const PotentialParams& params) const;
};

// Direct regressor (q, p [, params]) -> (qdot, pdot).
struct BaselineModel {
    DenseNet net;
    int param_channels = 0;

    void validate() const;
    static BaselineModel create(const std::vector<int>& hidden, int param_channels, std::uint64_t seed);
};

// ---- HNN -------------------------------------------------------------------

Derivatives hnn_derivatives(const HnnModel& model, const PhaseState& state, const PotentialParams& params);

// Mean over the batch of |dH/dp - qdot|^2 + |dH/dq + pdot|^2.
double hnn_loss(const HnnModel& model, std::span<const DerivativeSample> batch);

// Per-sample loss; adds its parameter gradient into grad.
double hnn_sample_loss_grad(const HnnModel& model, const DerivativeSample& sample, std::span<double> grad);

// ---- Baseline --------------------------------------------------------------

Derivatives baseline_derivatives(const BaselineModel& model, const PhaseState& state, const PotentialParams& params);

// Mean over batch and over the four derivative components of the squared error.
double baseline_loss(const BaselineModel& model, std::span<const DerivativeSample> batch);
double baseline_sample_loss_grad(const BaselineModel& model, const DerivativeSample& sample, std::span<double> grad);

// ---- Separable / symplectic recurrent --------------------------------------

// Leapfrog field backed by the input gradients of the two networks.
DerivativeField network_field(const SeparableModel& model);

Trajectory asrnn_rollout(const SeparableModel& model, const PhaseState& state0, const PotentialParams& params,
                         double dt, std::size_t n_steps, double escape_radius = kEscapeRadius);

inline constexpr double kDivergencePenalty = 1e6;

struct RolloutLoss {
    double loss = 0.0;
    bool diverged = false;
};

// Rolls out window.size() - 1 steps from window[0] and sums |q_t - q^_t|^2 + |p_t - p^_t|^2.
// A diverging rollout yields kDivergencePenalty plus the distance accumulated up to the divergence.
RolloutLoss srnn_loss(const SeparableModel& model, std::span<const PhaseState> window,
                      const PotentialParams& params, double dt);
RolloutLoss srnn_loss(const DerivativeField& field, std::span<const PhaseState> window,
                      const PotentialParams& params, double dt);

// Same loss recorded on a tape; adds d loss / d theta (SeparableModel::flat_params order) into grad.
RolloutLoss srnn_loss_grad(const SeparableModel& model, std::span<const PhaseState> window,
                           const PotentialParams& params, double dt, std::span<double> grad);

// ---- Conserved quantity and rollouts ---------------------------------------

std::vector<double> conserved_quantity(const SeparableModel& model, const Trajectory& traj,
                                       const PotentialParams& params);
std::vector<double> conserved_quantity(const HnnModel& model, const Trajectory& traj,
                                       const PotentialParams& params);

using VectorField = std::function<Derivatives(const PhaseState&)>;

// Classical fourth-order Runge-Kutta, used for the non-separable model kinds.
Trajectory rk4_rollout(const VectorField& field, const PhaseState& state0, const PotentialParams& params,
                       double dt, std::size_t n_steps, double escape_radius = kEscapeRadius);

Trajectory hnn_rollout(const HnnModel& model, const PhaseState& state0, const PotentialParams& params,
                       double dt, std::size_t n_steps, double escape_radius = kEscapeRadius);
Trajectory baseline_rollout(const BaselineModel& model, const PhaseState& state0, const PotentialParams& params,
                            double dt, std::size_t n_steps, double escape_radius = kEscapeRadius);

} // namespace symml
