#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "symml/dynamics.hpp"
#include "symml/models.hpp"

namespace symml {

struct LstmGate {
    Eigen::MatrixXd U; // hidden x input
    Eigen::MatrixXd V; // hidden x hidden
    Eigen::VectorXd b; // hidden
};

// Gates in canonical order f, i, o, and the candidate c.
struct LstmCellParams {
    LstmGate f, i, o, c;

    int input_size() const { return static_cast<int>(f.U.cols()); }
    int hidden_size() const { return static_cast<int>(f.U.rows()); }
    std::size_t param_count() const;
    void validate() const;

    static LstmCellParams zeros(int input_size, int hidden_size);
};

struct LstmState {
    Eigen::VectorXd h;
    Eigen::VectorXd c;
};

LstmState lstm_step(const LstmCellParams& cell, const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                    const Eigen::VectorXd& c);

// Single LSTM layer over (q_x, p_x) windows followed by an affine head to
// (q_y, p_y, alpha [, beta]).
struct EncoderModel {
    LstmCellParams cell;
    Eigen::MatrixXd head_w; // outputs x hidden
    Eigen::VectorXd head_b;
    std::size_t window_len = 30;

    int n_params() const { return static_cast<int>(head_b.size()) - 2; }
    void validate() const;

    static EncoderModel create(int hidden_size, int n_params, std::size_t window_len, std::uint64_t seed);
    static EncoderModel zeros(int hidden_size, int n_params, std::size_t window_len);

    // Flat order: for each gate f, i, o, c: U row-major, V row-major, b; then head W row-major, head b.
    std::size_t param_count() const;
    std::vector<double> flat_params() const;
    void set_flat_params(std::span<const double> flat);
};

struct EncoderOutput {
    double q_y = 0.0;
    double p_y = 0.0;
    Eigen::VectorXd params;
};

// Window entries are (q_x, p_x) pairs; h and c start at zero.
EncoderOutput encode_window(const EncoderModel& enc, std::span<const Vec2> window);

struct EncoderSample {
    std::vector<Vec2> window;
    double q_y = 0.0;
    double p_y = 0.0;
    Eigen::VectorXd params; // alpha [, beta]
};

// Mean over the batch of the summed squared errors of (q_y, p_y, alpha [, beta]).
double encoder_loss(const EncoderModel& enc, std::span<const EncoderSample> batch);

// Per-sample loss with its backpropagation-through-time gradient added into grad.
double encoder_sample_loss_grad(const EncoderModel& enc, const EncoderSample& sample, std::span<double> grad);

struct ParamEstimate {
    double mean = 0.0;
    double stddev = 0.0; // population standard deviation of the samples
    std::vector<double> samples;
};

using WindowEncoder = std::function<EncoderOutput(std::span<const Vec2>)>;

// Number of windows of length `window_len` taken every `stride` steps from a series of length `length`.
std::size_t window_count(std::size_t length, std::size_t window_len, std::size_t stride);

ParamEstimate infer_param_ensemble(const WindowEncoder& encoder, std::size_t window_len,
                                   std::span<const Vec2> series, std::size_t stride, int param_index = 0);
ParamEstimate infer_param_ensemble(const EncoderModel& enc, std::span<const Vec2> series, std::size_t stride,
                                   int param_index = 0);

// Parameters from the ensemble mean, hidden coordinates from the final window, then a
// leapfrog rollout of `horizon` steps from the last observed time.
Trajectory predict_from_partial(const WindowEncoder& encoder, std::size_t window_len, int n_params,
                                const DerivativeField& field, std::span<const Vec2> observed, std::size_t horizon,
                                double dt, std::size_t stride = 1);
Trajectory predict_from_partial(const EncoderModel& enc, const SeparableModel& asrnn, std::span<const Vec2> observed,
                                std::size_t horizon, double dt, std::size_t stride = 1);

} // namespace symml
