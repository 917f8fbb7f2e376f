#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symml/dynamics.hpp"

namespace symml {

// Per-step |E(pred) - E(truth)| / |E(truth)| * 100, both energies from the true Hamiltonian.
std::vector<double> relative_energy_error(const Trajectory& pred, const Trajectory& truth,
                                          const PotentialParams& params);
double mean_energy_error(const Trajectory& pred, const Trajectory& truth, const PotentialParams& params);
double mean(std::span<const double> values);

// Secular growth: the maximum over the second half exceeds `factor` times the maximum over the first half.
bool secular_growth(std::span<const double> series, double factor = 1.5);

struct LyapunovResult {
    Eigen::Vector4d exponents = Eigen::Vector4d::Zero(); // descending
    double maximal = 0.0;
    std::size_t n_steps = 0;         // steps actually integrated (whole intervals)
    std::size_t renorm_interval = 0; // steps per QR renormalization
};

inline constexpr double kJacobianEps = 1e-7;

using StepMap = std::function<PhaseState(const PhaseState&)>;

// Benettin/QR spectrum of the map applied n_steps times. Interval Jacobians come from
// central differences of the interval flow map; Gram-Schmidt QR every renorm_interval steps.
LyapunovResult lyapunov_spectrum(const StepMap& step, const PhaseState& state0, double dt, std::size_t n_steps,
                                 std::size_t renorm_interval);

// Leapfrog flow of a separable field.
LyapunovResult lyapunov_spectrum(const DerivativeField& field, const PhaseState& state0, const PotentialParams& params,
                                 double dt, std::size_t n_steps, std::size_t renorm_interval);

// Steps per renormalization for a default interval of 1.0 time units.
std::size_t default_renorm_interval(double dt);

double maximal_lyapunov(const LyapunovResult& result);
double maximal_lyapunov(const Eigen::Vector4d& exponents);

// Modified Gram-Schmidt, Z = Q R with positive diag(R). Throws DegenerateR otherwise.
void gram_schmidt_qr(const Eigen::Matrix4d& z, Eigen::Matrix4d& q, Eigen::Matrix4d& r);

struct SectionPoint {
    double q_y = 0.0;
    double p_y = 0.0;
    double crossing_time = 0.0;
};

// Crossings of q_x from negative to non-negative with p_x > 0, linearly interpolated in time.
std::vector<SectionPoint> poincare_section(const Trajectory& traj);

struct Boundedness {
    bool bounded = true;
    std::optional<std::size_t> first_escape;
};

Boundedness boundedness_check(const Trajectory& traj, double radius);

// CSV bodies (header line included).
std::string energy_error_csv(double dt, std::span<const double> percent);
struct LyapunovSweepRow {
    double alpha = 0.0;
    double beta = 0.0;
    double lambda_max = 0.0;
};
std::string lyapunov_sweep_csv(std::span<const LyapunovSweepRow> rows);
std::string section_csv(std::span<const SectionPoint> points);
std::string trajectory_csv(const Trajectory& traj);

// %.17g formatting used by every CSV emitter.
std::string format_double(double v);

} // namespace symml
