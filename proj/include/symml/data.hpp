#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "symml/dynamics.hpp"
#include "symml/lstm.hpp"
#include "symml/models.hpp"

namespace symml {

struct GenerationConfig {
    std::vector<PotentialParams> params;
    std::vector<double> energies;
    std::size_t trajectories = 50;    // per (params, energy) cell
    double fine_dt = 0.001;
    std::size_t coarse_factor = 100;
    std::size_t series_length = 3000; // coarse states per trajectory, initial state included
    std::size_t transient = 500;      // leading coarse states dropped
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t stored_length() const { return series_length - transient; }
    std::size_t trajectory_count() const { return params.size() * energies.size() * trajectories; }
    double coarse_dt() const { return fine_dt * static_cast<double>(coarse_factor); }
    bool operator==(const GenerationConfig&) const = default;
};

inline constexpr std::size_t kMaxRejections = 100000;
inline constexpr double kEnergyAuditTolerance = 1e-4;

// q uniform on [-1, 1]^2 until V(q) <= E, then |p| = sqrt(2 (E - V)) in a uniform direction.
// E = 0 returns the origin.
PhaseState sample_initial_condition(double energy, const PotentialParams& params, std::mt19937_64& rng);

struct TrajectoryRecord {
    std::uint64_t offset = 0; // index of the first state in the state block
    std::uint64_t length = 0;
    PotentialParams params;
    double energy = 0.0;
    bool operator==(const TrajectoryRecord&) const = default;
};

struct DatasetManifest {
    GenerationConfig config;
    std::vector<TrajectoryRecord> records;
    std::vector<PhaseState> states; // all trajectories back to back
    std::uint64_t total_states = 0;
    std::uint64_t resampled = 0;    // trajectories redrawn after divergence or a failed energy audit
    std::map<std::string, std::string> metadata; // free-form run header, saved with the manifest

    void validate() const;
    Trajectory trajectory(std::size_t i) const;
    bool operator==(const DatasetManifest&) const = default;
};

// Cells in order params-major, then energy, then trajectory index; trajectory k draws from
// its own stream seeded by (seed, k), so the output does not depend on scheduling.
DatasetManifest generate_dataset(const GenerationConfig& config);

template <class T>
struct Windows {
    std::vector<T> items;
    std::size_t skipped = 0; // trajectories too short to give a single window
};

// Every stride-th stored state with analytic targets qdot = p, pdot = -grad V.
Windows<DerivativeSample> derivative_pairs(const DatasetManifest& data, std::size_t stride = 1);

// Non-overlapping windows of window_len consecutive states within each trajectory.
Windows<RolloutWindow> srnn_windows(const DatasetManifest& data, std::size_t window_len = 11);

// (q_x, p_x) windows every `stride` states; targets are q_y, p_y at the window's last step and
// alpha [, beta].
Windows<EncoderSample> encoder_windows(const DatasetManifest& data, std::size_t window_len = 30,
                                       std::size_t stride = 1, int n_params = 1);

// Observed (q_x, p_x) series of one trajectory.
std::vector<Vec2> partial_observation(const Trajectory& traj);

inline constexpr int kDatasetFormatVersion = 1;

// File layout: the ASCII line "SMLDS <version> <manifest bytes>\n", the JSON manifest, then
// total_states * 4 little-endian IEEE-754 doubles in (q_x, q_y, p_x, p_y) order. The manifest
// carries the CRC-32 of the binary block.
void save_dataset(const DatasetManifest& data, const std::string& path);
DatasetManifest load_dataset(const std::string& path);

} // namespace symml
