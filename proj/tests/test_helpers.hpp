#pragma once

#include <functional>
#include <random>

#include <Eigen/Dense>

#include "symml/dynamics.hpp"

namespace symml::testing {

inline Eigen::Vector4d to_vec(const PhaseState& s)
{
    return {s.q.x(), s.q.y(), s.p.x(), s.p.y()};
}

inline PhaseState from_vec(const Eigen::Vector4d& v)
{
    PhaseState s;
    s.q = Vec2(v[0], v[1]);
    s.p = Vec2(v[2], v[3]);
    return s;
}

// Central-difference Jacobian of a phase-space map.
inline Eigen::Matrix4d numeric_jacobian(const std::function<PhaseState(const PhaseState&)>& map,
                                        const PhaseState& x, double eps)
{
    Eigen::Matrix4d J;
    const Eigen::Vector4d base = to_vec(x);
    for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d up = base;
        Eigen::Vector4d down = base;
        up[j] += eps;
        down[j] -= eps;
        J.col(j) = (to_vec(map(from_vec(up))) - to_vec(map(from_vec(down)))) / (2.0 * eps);
    }
    return J;
}

inline PhaseState random_state(std::mt19937_64& rng, double half_width)
{
    std::uniform_real_distribution<double> u(-half_width, half_width);
    PhaseState s;
    s.q = Vec2(u(rng), u(rng));
    s.p = Vec2(u(rng), u(rng));
    return s;
}

} // namespace symml::testing
