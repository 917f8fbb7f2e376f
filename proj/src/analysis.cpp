#include "symml/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "symml/errors.hpp"

namespace symml {

std::vector<double> relative_energy_error(const Trajectory& pred, const Trajectory& truth,
                                          const PotentialParams& params)
{
    if (pred.size() != truth.size())
        throw LengthMismatch("prediction has " + std::to_string(pred.size()) + " states, truth has " +
                             std::to_string(truth.size()));
    std::vector<double> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e_true = hh_energy(truth[i], params);
        if (e_true == 0.0)
            throw ZeroEnergy("true energy is zero at step " + std::to_string(i));
        out[i] = std::abs(hh_energy(pred[i], params) - e_true) / std::abs(e_true) * 100.0;
    }
    return out;
}

double mean(std::span<const double> values)
{
    if (values.empty())
        throw InvalidArgument("mean of an empty sequence");
    double s = 0.0;
    for (double v : values)
        s += v;
    return s / static_cast<double>(values.size());
}

double mean_energy_error(const Trajectory& pred, const Trajectory& truth, const PotentialParams& params)
{
    return mean(relative_energy_error(pred, truth, params));
}

bool secular_growth(std::span<const double> series, double factor)
{
    if (series.size() < 2)
        throw TooShort("secular growth check needs at least two values");
    const std::size_t half = series.size() / 2;
    const double first = *std::max_element(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(half));
    const double second = *std::max_element(series.begin() + static_cast<std::ptrdiff_t>(half), series.end());
    return second > factor * first;
}

void gram_schmidt_qr(const Eigen::Matrix4d& z, Eigen::Matrix4d& q, Eigen::Matrix4d& r)
{
    r.setZero();
    for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d v = z.col(j);
        for (int i = 0; i < j; ++i) {
            r(i, j) = q.col(i).dot(v);
            v -= r(i, j) * q.col(i);
        }
        r(j, j) = v.norm();
        if (!(r(j, j) > 0.0) || !std::isfinite(r(j, j)))
            throw DegenerateR("diagonal " + std::to_string(j) + " of R is not positive; step too large?");
        q.col(j) = v / r(j, j);
    }
}

namespace {

Eigen::Vector4d as_vec(const PhaseState& s) { return {s.q.x(), s.q.y(), s.p.x(), s.p.y()}; }
PhaseState as_state(const Eigen::Vector4d& v) { return {Vec2(v[0], v[1]), Vec2(v[2], v[3])}; }

using IntervalMap = std::function<PhaseState(const PhaseState&)>;

LyapunovResult benettin(const IntervalMap& flow, const PhaseState& state0, double dt, std::size_t n_intervals,
                        std::size_t renorm_interval)
{
    if (n_intervals < 1)
        throw InvalidArgument("lyapunov spectrum needs n_steps >= renorm_interval");
    Eigen::Matrix4d w = Eigen::Matrix4d::Identity();
    Eigen::Vector4d log_sum = Eigen::Vector4d::Zero();
    PhaseState x = state0;
    for (std::size_t k = 0; k < n_intervals; ++k) {
        const Eigen::Vector4d base = as_vec(x);
        Eigen::Matrix4d jac;
        for (int c = 0; c < 4; ++c) {
            Eigen::Vector4d up = base, down = base;
            up[c] += kJacobianEps;
            down[c] -= kJacobianEps;
            jac.col(c) = (as_vec(flow(as_state(up))) - as_vec(flow(as_state(down)))) / (2.0 * kJacobianEps);
        }
        Eigen::Matrix4d q, r;
        gram_schmidt_qr(jac * w, q, r);
        for (int i = 0; i < 4; ++i)
            log_sum[i] += std::log(r(i, i));
        w = q;
        x = flow(x);
    }
    LyapunovResult res;
    const double t_total = static_cast<double>(n_intervals * renorm_interval) * dt;
    res.exponents = log_sum / t_total;
    std::sort(res.exponents.begin(), res.exponents.end(), std::greater<>());
    res.maximal = res.exponents[0];
    res.n_steps = n_intervals * renorm_interval;
    res.renorm_interval = renorm_interval;
    return res;
}

void check_lyapunov_args(double dt, std::size_t renorm_interval)
{
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw InvalidArgument("lyapunov spectrum needs dt > 0");
    if (renorm_interval < 1)
        throw InvalidArgument("renormalization interval must be >= 1 step");
}

} // namespace

LyapunovResult lyapunov_spectrum(const StepMap& step, const PhaseState& state0, double dt, std::size_t n_steps,
                                 std::size_t renorm_interval)
{
    check_lyapunov_args(dt, renorm_interval);
    const IntervalMap flow = [&](const PhaseState& s) {
        PhaseState x = s;
        for (std::size_t i = 0; i < renorm_interval; ++i)
            x = step(x);
        return x;
    };
    return benettin(flow, state0, dt, n_steps / renorm_interval, renorm_interval);
}

LyapunovResult lyapunov_spectrum(const DerivativeField& field, const PhaseState& state0, const PotentialParams& params,
                                 double dt, std::size_t n_steps, std::size_t renorm_interval)
{
    check_lyapunov_args(dt, renorm_interval);
    const IntervalMap flow = [&](const PhaseState& s) { return advance(s, dt, renorm_interval, field, params); };
    return benettin(flow, state0, dt, n_steps / renorm_interval, renorm_interval);
}

std::size_t default_renorm_interval(double dt)
{
    if (!(dt > 0.0))
        throw InvalidArgument("dt must be positive");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / dt)));
}

double maximal_lyapunov(const Eigen::Vector4d& exponents) { return exponents.maxCoeff(); }
double maximal_lyapunov(const LyapunovResult& result) { return maximal_lyapunov(result.exponents); }

std::vector<SectionPoint> poincare_section(const Trajectory& traj)
{
    std::vector<SectionPoint> out;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const PhaseState& a = traj[i];
        const PhaseState& b = traj[i + 1];
        if (!(a.q.x() < 0.0 && b.q.x() >= 0.0))
            continue;
        const double s = -a.q.x() / (b.q.x() - a.q.x());
        const double px = a.p.x() + s * (b.p.x() - a.p.x());
        if (!(px > 0.0))
            continue;
        out.push_back({a.q.y() + s * (b.q.y() - a.q.y()), a.p.y() + s * (b.p.y() - a.p.y()),
                       (static_cast<double>(i) + s) * traj.dt()});
    }
    return out;
}

Boundedness boundedness_check(const Trajectory& traj, double radius)
{
    if (!(radius > 0.0))
        throw InvalidArgument("boundedness radius must be positive");
    for (std::size_t i = 0; i < traj.size(); ++i)
        if (!(traj[i].q.cwiseAbs().maxCoeff() <= radius))
            return {false, i};
    return {};
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string energy_error_csv(double dt, std::span<const double> percent)
{
    std::string out = "t,percent\n";
    for (std::size_t i = 0; i < percent.size(); ++i)
        out += format_double(static_cast<double>(i) * dt) + "," + format_double(percent[i]) + "\n";
    return out;
}

std::string lyapunov_sweep_csv(std::span<const LyapunovSweepRow> rows)
{
    std::string out = "alpha,beta,lambda_max\n";
    for (const auto& r : rows)
        out += format_double(r.alpha) + "," + format_double(r.beta) + "," + format_double(r.lambda_max) + "\n";
    return out;
}

std::string section_csv(std::span<const SectionPoint> points)
{
    std::string out = "q_y,p_y\n";
    for (const auto& p : points)
        out += format_double(p.q_y) + "," + format_double(p.p_y) + "\n";
    return out;
}

std::string trajectory_csv(const Trajectory& traj)
{
    std::string out = "t,q_x,q_y,p_x,p_y,energy\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const PhaseState& s = traj[i];
        out += format_double(traj.time(i)) + "," + format_double(s.q.x()) + "," + format_double(s.q.y()) + "," +
               format_double(s.p.x()) + "," + format_double(s.p.y()) + "," +
               format_double(hh_energy(s, traj.params())) + "\n";
    }
    return out;
}

} // namespace symml
