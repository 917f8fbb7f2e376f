#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace symml {

enum class Activation { tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Layer sizes from input to output. Hidden layers use `activation`; the output layer is affine.
struct DenseNetSpec {
    std::vector<int> layer_sizes;
    Activation activation = Activation::tanh;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; } // affine maps
    std::size_t param_count() const;
    void validate() const;
    bool operator==(const DenseNetSpec&) const = default;
};

// Flat parameter vector. Canonical order, for each affine map n = 1..L in turn:
//   W^(n) row-major (size_n x size_{n-1}), then b^(n) (size_n).
using NetParams = std::vector<double>;

struct LayerParams {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
    bool operator==(const LayerParams& o) const { return weight == o.weight && bias == o.bias; }
};

std::vector<LayerParams> unflatten(const DenseNetSpec& spec, std::span<const double> params);
NetParams flatten(const DenseNetSpec& spec, const std::vector<LayerParams>& layers);

// Scaled-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
NetParams init_params(const DenseNetSpec& spec, std::uint64_t seed);

Eigen::VectorXd forward(const DenseNetSpec& spec, std::span<const double> params,
                        const Eigen::VectorXd& x);

// Exact reverse-mode gradient of output[output_index] with respect to x.
Eigen::VectorXd grad_inputs(const DenseNetSpec& spec, std::span<const double> params,
                            const Eigen::VectorXd& x, int output_index);

// Activations recorded by a forward pass: activations[0] = x, activations[n] = sigma(z^(n))
// for hidden layers, activations[L] = network output.
struct ForwardCache {
    std::vector<Eigen::VectorXd> activations;
    const Eigen::VectorXd& output() const { return activations.back(); }
};

ForwardCache forward_cached(const DenseNetSpec& spec, std::span<const double> params,
                            const Eigen::VectorXd& x);

// Vector-Jacobian product of the forward map: given dL/dy, accumulates dL/dtheta into
// param_grad and returns dL/dx.
Eigen::VectorXd forward_vjp(const DenseNetSpec& spec, std::span<const double> params,
                            const ForwardCache& cache, const Eigen::VectorXd& output_adjoint,
                            std::span<double> param_grad);

// Input gradient of output[output_index] evaluated from a recorded forward pass.
Eigen::VectorXd input_gradient(const DenseNetSpec& spec, std::span<const double> params,
                               const ForwardCache& cache, int output_index);

// Vector-Jacobian product of the input-gradient map g(x, theta) = d y_k / dx.
// Given dL/dg, accumulates dL/dtheta into param_grad and returns dL/dx. This is the
// second-order step that lets losses built from input gradients be trained.
Eigen::VectorXd input_gradient_vjp(const DenseNetSpec& spec, std::span<const double> params,
                                   const ForwardCache& cache, int output_index,
                                   const Eigen::VectorXd& grad_adjoint, std::span<double> param_grad);

// Spec plus owned parameters.
struct DenseNet {
    DenseNetSpec spec;
    NetParams params;

    DenseNet() = default;
    DenseNet(DenseNetSpec s, NetParams p);
    static DenseNet initialized(DenseNetSpec s, std::uint64_t seed);

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return forward(spec, params, x); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x, int output_index = 0) const
    {
        return grad_inputs(spec, params, x, output_index);
    }
};

} // namespace symml
