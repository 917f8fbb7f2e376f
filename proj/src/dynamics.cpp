#include "symml/dynamics.hpp"

#include <cmath>
#include <string>

#include "symml/errors.hpp"

namespace symml {

double hh_potential(const Vec2& q, const PotentialParams& params)
{
    const double qx = q.x();
    const double qy = q.y();
    return 0.5 * (qx * qx + qy * qy) + params.alpha * qx * qx * qy - params.beta * qy * qy * qy / 3.0;
}

double hh_energy(const PhaseState& state, const PotentialParams& params)
{
    return 0.5 * state.p.squaredNorm() + hh_potential(state.q, params);
}

Vec2 hh_grad_v(const Vec2& q, const PotentialParams& params)
{
    const double qx = q.x();
    const double qy = q.y();
    return {qx + 2.0 * params.alpha * qx * qy, qy + params.alpha * qx * qx - params.beta * qy * qy};
}

Vec2 kinetic_grad(const Vec2& p) { return p; }

DerivativeField henon_heiles_field()
{
    return {hh_grad_v, kinetic_grad};
}

Trajectory::Trajectory(double dt, std::vector<PhaseState> states, PotentialParams params)
    : dt_(dt), states_(std::move(states)), params_(params), energy0_(0.0)
{
    if (!(dt_ > 0.0) || !std::isfinite(dt_))
        throw InvalidArgument("trajectory step must be positive and finite");
    if (states_.empty())
        throw InvalidArgument("trajectory needs at least one state");
    energy0_ = hh_energy(states_.front(), params_);
}

namespace {

// nullptr when the state is acceptable, otherwise the divergence reason.
const char* check_state(const PhaseState& s, double escape_radius)
{
    if (!s.finite())
        return "non-finite state";
    if (s.q.cwiseAbs().maxCoeff() > escape_radius)
        return "escaped radius";
    return nullptr;
}

PhaseState kick_drift_kick(const PhaseState& state, const Vec2& grad_v_start, Vec2& grad_v_end,
                           double dt, const DerivativeField& field, const PotentialParams& params)
{
    PhaseState next;
    const Vec2 p_half = state.p - (0.5 * dt) * grad_v_start;
    next.q = state.q + dt * field.grad_k(p_half);
    grad_v_end = field.grad_v(next.q, params);
    next.p = p_half - (0.5 * dt) * grad_v_end;
    return next;
}

} // namespace

PhaseState leapfrog_step(const PhaseState& state, double dt, const DerivativeField& field,
                         const PotentialParams& params, double escape_radius)
{
    if (dt == 0.0 || !std::isfinite(dt))
        throw InvalidArgument("leapfrog step needs a finite nonzero dt");
    Vec2 grad_end;
    PhaseState next = kick_drift_kick(state, field.grad_v(state.q, params), grad_end, dt, field, params);
    if (const char* why = check_state(next, escape_radius))
        throw IntegrationDiverged(0, why);
    return next;
}

Trajectory integrate(const PhaseState& state0, double dt, std::size_t n_steps,
                     const DerivativeField& field, const PotentialParams& params, double escape_radius)
{
    if (n_steps < 1)
        throw InvalidArgument("integrate needs n_steps >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw InvalidArgument("integrate needs dt > 0");

    std::vector<PhaseState> states;
    states.reserve(n_steps + 1);
    states.push_back(state0);

    // The closing kick of one step and the opening kick of the next share grad_v(q).
    Vec2 grad_v = field.grad_v(state0.q, params);
    for (std::size_t i = 0; i < n_steps; ++i) {
        Vec2 grad_end;
        PhaseState next = kick_drift_kick(states.back(), grad_v, grad_end, dt, field, params);
        if (const char* why = check_state(next, escape_radius))
            throw IntegrationDiverged(i + 1, why);
        states.push_back(next);
        grad_v = grad_end;
    }
    return Trajectory(dt, std::move(states), params);
}

PhaseState advance(const PhaseState& state0, double dt, std::size_t n_steps, const DerivativeField& field,
                   const PotentialParams& params, double escape_radius)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw InvalidArgument("advance needs dt > 0");
    PhaseState s = state0;
    Vec2 grad_v = field.grad_v(s.q, params);
    for (std::size_t i = 0; i < n_steps; ++i) {
        Vec2 grad_end;
        s = kick_drift_kick(s, grad_v, grad_end, dt, field, params);
        if (const char* why = check_state(s, escape_radius))
            throw IntegrationDiverged(i + 1, why);
        grad_v = grad_end;
    }
    return s;
}

Trajectory coarse_grain(const Trajectory& traj, std::size_t factor)
{
    if (factor < 1)
        throw BadFactor("coarse-graining factor must be >= 1");
    std::vector<PhaseState> kept;
    kept.reserve(traj.size() / factor + 1);
    for (std::size_t i = 0; i < traj.size(); i += factor)
        kept.push_back(traj[i]);
    return Trajectory(traj.dt() * static_cast<double>(factor), std::move(kept), traj.params());
}

} // namespace symml
