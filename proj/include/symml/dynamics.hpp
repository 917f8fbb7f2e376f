#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace symml {

using Vec2 = Eigen::Vector2d;

// Canonical coordinates of the 4-dimensional Henon-Heiles phase space (m = omega = 1).
struct PhaseState {
    Vec2 q = Vec2::Zero();
    Vec2 p = Vec2::Zero();

    bool finite() const { return q.allFinite() && p.allFinite(); }
    bool operator==(const PhaseState& other) const { return q == other.q && p == other.p; }
};

// Nonlinearity strengths of the cubic coupling. Single-parameter mode uses beta == alpha.
struct PotentialParams {
    double alpha = 1.0;
    double beta = 1.0;

    static PotentialParams single(double alpha) { return {alpha, alpha}; }
    bool operator==(const PotentialParams&) const = default;
};

// Gradients of a separable Hamiltonian H = K(p) + V(q; params).
struct DerivativeField {
    std::function<Vec2(const Vec2& q, const PotentialParams& params)> grad_v;
    std::function<Vec2(const Vec2& p)> grad_k;
};

inline constexpr double kEscapeRadius = 10.0;

double hh_potential(const Vec2& q, const PotentialParams& params);
double hh_energy(const PhaseState& state, const PotentialParams& params);

// dV/dq = (q_x + 2 alpha q_x q_y, q_y + alpha q_x^2 - beta q_y^2); pdot is its negative.
Vec2 hh_grad_v(const Vec2& q, const PotentialParams& params);

// dK/dp for K = |p|^2 / 2.
Vec2 kinetic_grad(const Vec2& p);

// Ground-truth field: analytic Henon-Heiles gradients.
DerivativeField henon_heiles_field();

// Time-stamped sequence of states at a fixed step. Immutable after construction.
class Trajectory {
public:
    Trajectory(double dt, std::vector<PhaseState> states, PotentialParams params);

    double dt() const noexcept { return dt_; }
    const std::vector<PhaseState>& states() const noexcept { return states_; }
    const PotentialParams& params() const noexcept { return params_; }
    double energy0() const noexcept { return energy0_; }
    std::size_t size() const noexcept { return states_.size(); }
    const PhaseState& operator[](std::size_t i) const { return states_[i]; }
    const PhaseState& back() const { return states_.back(); }
    double time(std::size_t i) const { return static_cast<double>(i) * dt_; }

private:
    double dt_;
    std::vector<PhaseState> states_;
    PotentialParams params_;
    double energy0_;
};

// One kick-drift-kick step. dt may be negative (time reversal) but not zero.
// Throws IntegrationDiverged if the result is non-finite or |q|_inf exceeds escape_radius.
PhaseState leapfrog_step(const PhaseState& state, double dt, const DerivativeField& field,
                         const PotentialParams& params, double escape_radius = kEscapeRadius);

// n_steps leapfrog steps; the returned trajectory holds n_steps + 1 states including state0.
Trajectory integrate(const PhaseState& state0, double dt, std::size_t n_steps,
                     const DerivativeField& field, const PotentialParams& params,
                     double escape_radius = kEscapeRadius);

// Final state of integrate() without storing the intermediate states (bit-identical).
PhaseState advance(const PhaseState& state0, double dt, std::size_t n_steps, const DerivativeField& field,
                   const PotentialParams& params, double escape_radius = kEscapeRadius);

// Keeps every factor-th state; the stored step becomes dt * factor.
Trajectory coarse_grain(const Trajectory& traj, std::size_t factor);

} // namespace symml
