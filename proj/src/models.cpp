#include "symml/models.hpp"

#include <cmath>

#include "symml/errors.hpp"

namespace symml {

Eigen::VectorXd param_channels(const PotentialParams& params, int n_channels)
{
    switch (n_channels) {
    case 0: return Eigen::VectorXd(0);
    case 1: return Eigen::VectorXd::Constant(1, params.alpha);
    case 2: {
        Eigen::VectorXd v(2);
        v << params.alpha, params.beta;
        return v;
    }
    default: throw InvalidArgument("parameter channels must be 0, 1 or 2");
    }
}

namespace {

std::vector<int> layers(int in, const std::vector<int>& hidden, int out)
{
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

void check_net(const DenseNet& net, int in, int out, const char* what)
{
    net.spec.validate();
    if (net.spec.input_size() != in || net.spec.output_size() != out)
        throw ShapeMismatch(std::string(what) + " network has the wrong input or output size");
    if (net.params.size() != net.spec.param_count())
        throw ShapeMismatch(std::string(what) + " parameter vector does not match its spec");
}

Eigen::VectorXd phase_input(const PhaseState& s, const PotentialParams& params, int channels)
{
    const Eigen::VectorXd extra = param_channels(params, channels);
    Eigen::VectorXd x(4 + extra.size());
    x << s.q, s.p, extra;
    return x;
}

Eigen::VectorXd potential_input(const Vec2& q, const PotentialParams& params, int channels)
{
    const Eigen::VectorXd extra = param_channels(params, channels);
    Eigen::VectorXd x(2 + extra.size());
    x << q, extra;
    return x;
}

bool escaped(const PhaseState& s, double radius)
{
    return !s.finite() || s.q.cwiseAbs().maxCoeff() > radius;
}

void check_window(std::span<const PhaseState> window, double dt)
{
    if (window.size() < 2)
        throw TooShort("rollout loss needs a window of at least two states");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw InvalidArgument("rollout loss needs dt > 0");
}

void add_into(std::span<double> grad, const std::vector<double>& g)
{
    if (grad.size() != g.size())
        throw ShapeMismatch("gradient buffer has the wrong size");
    for (std::size_t i = 0; i < g.size(); ++i)
        grad[i] += g[i];
}

} // namespace

void HnnModel::validate() const
{
    if (param_channels < 0 || param_channels > 2)
        throw InvalidArgument("parameter channels must be 0, 1 or 2");
    check_net(net, 4 + param_channels, 1, "hnn");
}

HnnModel HnnModel::create(const std::vector<int>& hidden, int param_channels, std::uint64_t seed)
{
    HnnModel m;
    m.param_channels = param_channels;
    m.net = DenseNet::initialized({layers(4 + param_channels, hidden, 1), Activation::tanh}, seed);
    m.validate();
    return m;
}

void SeparableModel::validate() const
{
    if (param_channels < 0 || param_channels > 2)
        throw InvalidArgument("parameter channels must be 0, 1 or 2");
    if (!fixed_kinetic)
        check_net(kinetic, 2, 1, "kinetic");
    check_net(potential, 2 + param_channels, 1, "potential");
}

SeparableModel SeparableModel::create(const std::vector<int>& hidden, int param_channels, bool fixed_kinetic,
                                      std::uint64_t seed)
{
    SeparableModel m;
    m.param_channels = param_channels;
    m.fixed_kinetic = fixed_kinetic;
    if (!fixed_kinetic)
        m.kinetic = DenseNet::initialized({layers(2, hidden, 1), Activation::tanh}, seed);
    m.potential = DenseNet::initialized({layers(2 + param_channels, hidden, 1), Activation::tanh}, seed + 1);
    m.validate();
    return m;
}

std::size_t SeparableModel::param_count() const
{
    return (fixed_kinetic ? 0 : kinetic.params.size()) + potential.params.size();
}

std::vector<double> SeparableModel::flat_params() const
{
    std::vector<double> flat;
    flat.reserve(param_count());
    if (!fixed_kinetic)
        flat.insert(flat.end(), kinetic.params.begin(), kinetic.params.end());
    flat.insert(flat.end(), potential.params.begin(), potential.params.end());
    return flat;
}

void SeparableModel::set_flat_params(std::span<const double> flat)
{
    if (flat.size() != param_count())
        throw ShapeMismatch("flat parameter vector has the wrong size");
    std::size_t k = fixed_kinetic ? 0 : kinetic.params.size();
    if (!fixed_kinetic)
        std::copy(flat.begin(), flat.begin() + k, kinetic.params.begin());
    std::copy(flat.begin() + k, flat.end(), potential.params.begin());
}

Vec2 SeparableModel::grad_v(const Vec2& q, const PotentialParams& params) const
{
    return potential.gradient(potential_input(q, params, param_channels), 0).head<2>();
}

Vec2 SeparableModel::grad_k(const Vec2& p) const
{
    if (fixed_kinetic)
        return p;
    return kinetic.gradient(p, 0).head<2>();
}

double SeparableModel::energy(const PhaseState& s, const PotentialParams& params) const
{
    const double k = fixed_kinetic ? 0.5 * s.p.squaredNorm() : kinetic(s.p)[0];
    return k + potential(potential_input(s.q, params, param_channels))[0];
}

void BaselineModel::validate() const
{
    if (param_channels < 0 || param_channels > 2)
        throw InvalidArgument("parameter channels must be 0, 1 or 2");
    check_net(net, 4 + param_channels, 4, "baseline");
}

BaselineModel BaselineModel::create(const std::vector<int>& hidden, int param_channels, std::uint64_t seed)
{
    BaselineModel m;
    m.param_channels = param_channels;
    m.net = DenseNet::initialized({layers(4 + param_channels, hidden, 4), Activation::tanh}, seed);
    m.validate();
    return m;
}

// ---- HNN -------------------------------------------------------------------

Derivatives hnn_derivatives(const HnnModel& model, const PhaseState& state, const PotentialParams& params)
{
    const Eigen::VectorXd g = model.net.gradient(phase_input(state, params, model.param_channels), 0);
    return {g.segment<2>(2), -g.head<2>()};
}

double hnn_loss(const HnnModel& model, std::span<const DerivativeSample> batch)
{
    if (batch.empty())
        throw EmptyBatch("hnn loss needs at least one sample");
    double total = 0.0;
    for (const auto& s : batch) {
        const Derivatives d = hnn_derivatives(model, s.state, s.params);
        total += (d.qdot - s.qdot).squaredNorm() + (d.pdot - s.pdot).squaredNorm();
    }
    return total / static_cast<double>(batch.size());
}

double hnn_sample_loss_grad(const HnnModel& model, const DerivativeSample& sample, std::span<double> grad)
{
    Tape tape;
    const auto net = tape.register_net(model.net.spec, model.net.params);
    const auto x = tape.constant(phase_input(sample.state, sample.params, model.param_channels));
    const auto g = tape.net_grad_inputs(net, x, 0);
    // dH/dp should match qdot and dH/dq should match -pdot.
    const auto rq = tape.sub(tape.slice(g, 2, 2), tape.constant(Eigen::VectorXd(sample.qdot)));
    const auto rp = tape.add(tape.slice(g, 0, 2), tape.constant(Eigen::VectorXd(sample.pdot)));
    const auto loss = tape.add(tape.squared_norm(rq), tape.squared_norm(rp));
    add_into(grad, tape.grad_params(loss));
    return tape.scalar(loss);
}

// ---- Baseline --------------------------------------------------------------

Derivatives baseline_derivatives(const BaselineModel& model, const PhaseState& state, const PotentialParams& params)
{
    const Eigen::VectorXd y = model.net(phase_input(state, params, model.param_channels));
    return {y.head<2>(), y.segment<2>(2)};
}

namespace {

Eigen::VectorXd baseline_target(const DerivativeSample& s)
{
    Eigen::VectorXd t(4);
    t << s.qdot, s.pdot;
    return t;
}

} // namespace

double baseline_loss(const BaselineModel& model, std::span<const DerivativeSample> batch)
{
    if (batch.empty())
        throw EmptyBatch("baseline loss needs at least one sample");
    double total = 0.0;
    for (const auto& s : batch) {
        const Eigen::VectorXd y = model.net(phase_input(s.state, s.params, model.param_channels));
        total += (y - baseline_target(s)).squaredNorm() / 4.0;
    }
    return total / static_cast<double>(batch.size());
}

double baseline_sample_loss_grad(const BaselineModel& model, const DerivativeSample& sample, std::span<double> grad)
{
    const ForwardCache cache =
        forward_cached(model.net.spec, model.net.params, phase_input(sample.state, sample.params, model.param_channels));
    const Eigen::VectorXd r = cache.output() - baseline_target(sample);
    forward_vjp(model.net.spec, model.net.params, cache, 0.5 * r, grad);
    return r.squaredNorm() / 4.0;
}

// ---- Separable / symplectic recurrent --------------------------------------

DerivativeField network_field(const SeparableModel& model)
{
    // The field refers to the model; it must stay alive while the field is in use.
    const SeparableModel* m = &model;
    return {[m](const Vec2& q, const PotentialParams& params) { return m->grad_v(q, params); },
            [m](const Vec2& p) { return m->grad_k(p); }};
}

Trajectory asrnn_rollout(const SeparableModel& model, const PhaseState& state0, const PotentialParams& params,
                         double dt, std::size_t n_steps, double escape_radius)
{
    return integrate(state0, dt, n_steps, network_field(model), params, escape_radius);
}

RolloutLoss srnn_loss(const DerivativeField& field, std::span<const PhaseState> window,
                      const PotentialParams& params, double dt)
{
    check_window(window, dt);
    RolloutLoss out;
    PhaseState s = window[0];
    Vec2 gv = field.grad_v(s.q, params);
    for (std::size_t t = 1; t < window.size(); ++t) {
        const Vec2 p_half = s.p - (0.5 * dt) * gv;
        s.q = s.q + dt * field.grad_k(p_half);
        gv = field.grad_v(s.q, params);
        s.p = p_half - (0.5 * dt) * gv;
        if (escaped(s, kEscapeRadius)) {
            out.loss += kDivergencePenalty;
            out.diverged = true;
            return out;
        }
        out.loss += (s.q - window[t].q).squaredNorm() + (s.p - window[t].p).squaredNorm();
    }
    return out;
}

RolloutLoss srnn_loss(const SeparableModel& model, std::span<const PhaseState> window,
                      const PotentialParams& params, double dt)
{
    return srnn_loss(network_field(model), window, params, dt);
}

RolloutLoss srnn_loss_grad(const SeparableModel& model, std::span<const PhaseState> window,
                           const PotentialParams& params, double dt, std::span<double> grad)
{
    check_window(window, dt);
    if (grad.size() != model.param_count())
        throw ShapeMismatch("gradient buffer has the wrong size");

    Tape tape;
    Tape::NetRef k_net{};
    if (!model.fixed_kinetic)
        k_net = tape.register_net(model.kinetic.spec, model.kinetic.params);
    const auto v_net = tape.register_net(model.potential.spec, model.potential.params);
    const auto channels = tape.constant(param_channels(params, model.param_channels));

    auto grad_v = [&](Tape::Var q) {
        const auto x = model.param_channels > 0 ? tape.concat(q, channels) : q;
        return tape.slice(tape.net_grad_inputs(v_net, x, 0), 0, 2);
    };
    auto grad_k = [&](Tape::Var p) { return model.fixed_kinetic ? p : tape.net_grad_inputs(k_net, p, 0); };
    auto as_state = [&](Tape::Var q, Tape::Var p) {
        return PhaseState{tape.value(q).head<2>(), tape.value(p).head<2>()};
    };

    RolloutLoss out;
    auto q = tape.constant(Eigen::VectorXd(window[0].q));
    auto p = tape.constant(Eigen::VectorXd(window[0].p));
    auto gv = grad_v(q);
    Tape::Var loss{};
    bool have_loss = false;
    for (std::size_t t = 1; t < window.size(); ++t) {
        const auto p_half = tape.axpy(p, -0.5 * dt, gv);
        q = tape.axpy(q, dt, grad_k(p_half));
        gv = grad_v(q);
        p = tape.axpy(p_half, -0.5 * dt, gv);
        if (escaped(as_state(q, p), kEscapeRadius)) {
            out.diverged = true;
            break;
        }
        const auto d = tape.add(tape.squared_norm(tape.sub(q, tape.constant(Eigen::VectorXd(window[t].q)))),
                                tape.squared_norm(tape.sub(p, tape.constant(Eigen::VectorXd(window[t].p)))));
        loss = have_loss ? tape.add(loss, d) : d;
        have_loss = true;
    }
    if (have_loss) {
        out.loss = tape.scalar(loss);
        add_into(grad, tape.grad_params(loss));
    }
    if (out.diverged)
        out.loss += kDivergencePenalty;
    return out;
}

// ---- Conserved quantity and rollouts ---------------------------------------

std::vector<double> conserved_quantity(const SeparableModel& model, const Trajectory& traj,
                                       const PotentialParams& params)
{
    std::vector<double> h;
    h.reserve(traj.size());
    for (const auto& s : traj.states())
        h.push_back(model.energy(s, params));
    return h;
}

std::vector<double> conserved_quantity(const HnnModel& model, const Trajectory& traj,
                                       const PotentialParams& params)
{
    std::vector<double> h;
    h.reserve(traj.size());
    for (const auto& s : traj.states())
        h.push_back(model.net(phase_input(s, params, model.param_channels))[0]);
    return h;
}

Trajectory rk4_rollout(const VectorField& field, const PhaseState& state0, const PotentialParams& params,
                       double dt, std::size_t n_steps, double escape_radius)
{
    if (n_steps < 1)
        throw InvalidArgument("rollout needs n_steps >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw InvalidArgument("rollout needs dt > 0");

    auto shifted = [](const PhaseState& s, const Derivatives& d, double h) {
        return PhaseState{s.q + h * d.qdot, s.p + h * d.pdot};
    };
    std::vector<PhaseState> states;
    states.reserve(n_steps + 1);
    states.push_back(state0);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const PhaseState& s = states.back();
        const Derivatives k1 = field(s);
        const Derivatives k2 = field(shifted(s, k1, 0.5 * dt));
        const Derivatives k3 = field(shifted(s, k2, 0.5 * dt));
        const Derivatives k4 = field(shifted(s, k3, dt));
        PhaseState next{s.q + (dt / 6.0) * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot),
                        s.p + (dt / 6.0) * (k1.pdot + 2.0 * k2.pdot + 2.0 * k3.pdot + k4.pdot)};
        if (escaped(next, escape_radius))
            throw IntegrationDiverged(i + 1, next.finite() ? "escaped radius" : "non-finite state");
        states.push_back(next);
    }
    return Trajectory(dt, std::move(states), params);
}

Trajectory hnn_rollout(const HnnModel& model, const PhaseState& state0, const PotentialParams& params,
                       double dt, std::size_t n_steps, double escape_radius)
{
    return rk4_rollout([&](const PhaseState& s) { return hnn_derivatives(model, s, params); }, state0, params, dt,
                       n_steps, escape_radius);
}

Trajectory baseline_rollout(const BaselineModel& model, const PhaseState& state0, const PotentialParams& params,
                            double dt, std::size_t n_steps, double escape_radius)
{
    return rk4_rollout([&](const PhaseState& s) { return baseline_derivatives(model, s, params); }, state0, params,
                       dt, n_steps, escape_radius);
}

} // namespace symml
