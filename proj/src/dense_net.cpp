#include "symml/dense_net.hpp"

#include <cmath>
#include <random>

#include "symml/errors.hpp"

namespace symml {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

// Offsets of W^(n) and b^(n) inside the flat vector.
struct LayerOffsets {
    std::size_t weight;
    std::size_t bias;
    int rows;
    int cols;
};

std::vector<LayerOffsets> layer_offsets(const DenseNetSpec& spec)
{
    std::vector<LayerOffsets> out;
    out.reserve(spec.num_layers());
    std::size_t cursor = 0;
    for (std::size_t n = 0; n < spec.num_layers(); ++n) {
        const int cols = spec.layer_sizes[n];
        const int rows = spec.layer_sizes[n + 1];
        LayerOffsets o{cursor, cursor + static_cast<std::size_t>(rows) * cols, rows, cols};
        cursor = o.bias + rows;
        out.push_back(o);
    }
    return out;
}

void check_params(const DenseNetSpec& spec, std::span<const double> params)
{
    if (params.size() != spec.param_count())
        throw ShapeMismatch("expected " + std::to_string(spec.param_count()) + " parameters, got "
                            + std::to_string(params.size()));
}

void check_input(const DenseNetSpec& spec, const Eigen::VectorXd& x)
{
    if (x.size() != spec.input_size())
        throw ShapeMismatch("expected input of size " + std::to_string(spec.input_size()) + ", got "
                            + std::to_string(x.size()));
}

void check_output_index(const DenseNetSpec& spec, int k)
{
    if (k < 0 || k >= spec.output_size())
        throw ShapeMismatch("output index " + std::to_string(k) + " out of range");
}

// sigma'(z) expressed through a = sigma(z).
Eigen::VectorXd first_derivative(Activation act, const Eigen::VectorXd& a)
{
    if (act == Activation::identity)
        return Eigen::VectorXd::Ones(a.size());
    return (1.0 - a.array().square()).matrix();
}

Eigen::VectorXd second_derivative(Activation act, const Eigen::VectorXd& a)
{
    if (act == Activation::identity)
        return Eigen::VectorXd::Zero(a.size());
    return (-2.0 * a.array() * (1.0 - a.array().square())).matrix();
}

} // namespace

std::string to_string(Activation a)
{
    return a == Activation::tanh ? "tanh" : "identity";
}

Activation activation_from_string(const std::string& name)
{
    if (name == "tanh")
        return Activation::tanh;
    if (name == "identity")
        return Activation::identity;
    throw InvalidArgument("unknown activation '" + name + "'");
}

std::size_t DenseNetSpec::param_count() const
{
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i)
        n += static_cast<std::size_t>(layer_sizes[i + 1]) * (layer_sizes[i] + 1);
    return n;
}

void DenseNetSpec::validate() const
{
    if (layer_sizes.size() < 2)
        throw ShapeMismatch("a dense net needs at least an input and an output layer");
    for (int s : layer_sizes)
        if (s < 1)
            throw ShapeMismatch("layer sizes must be >= 1");
}

std::vector<LayerParams> unflatten(const DenseNetSpec& spec, std::span<const double> params)
{
    spec.validate();
    check_params(spec, params);
    std::vector<LayerParams> layers;
    for (const auto& o : layer_offsets(spec)) {
        LayerParams lp;
        lp.weight = ConstMatMap(params.data() + o.weight, o.rows, o.cols);
        lp.bias = ConstVecMap(params.data() + o.bias, o.rows);
        layers.push_back(std::move(lp));
    }
    return layers;
}

NetParams flatten(const DenseNetSpec& spec, const std::vector<LayerParams>& layers)
{
    spec.validate();
    if (layers.size() != spec.num_layers())
        throw ShapeMismatch("layer count does not match spec");
    NetParams flat(spec.param_count());
    const auto offsets = layer_offsets(spec);
    for (std::size_t n = 0; n < layers.size(); ++n) {
        const auto& o = offsets[n];
        if (layers[n].weight.rows() != o.rows || layers[n].weight.cols() != o.cols
            || layers[n].bias.size() != o.rows)
            throw ShapeMismatch("layer " + std::to_string(n) + " has the wrong shape");
        MatMap(flat.data() + o.weight, o.rows, o.cols) = layers[n].weight;
        VecMap(flat.data() + o.bias, o.rows) = layers[n].bias;
    }
    return flat;
}

NetParams init_params(const DenseNetSpec& spec, std::uint64_t seed)
{
    spec.validate();
    NetParams flat(spec.param_count(), 0.0);
    std::mt19937_64 rng(seed);
    for (const auto& o : layer_offsets(spec)) {
        const double bound = std::sqrt(6.0 / static_cast<double>(o.rows + o.cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < static_cast<std::size_t>(o.rows) * o.cols; ++i)
            flat[o.weight + i] = dist(rng);
    }
    return flat;
}

ForwardCache forward_cached(const DenseNetSpec& spec, std::span<const double> params,
                            const Eigen::VectorXd& x)
{
    check_params(spec, params);
    check_input(spec, x);
    const auto offsets = layer_offsets(spec);
    ForwardCache cache;
    cache.activations.reserve(offsets.size() + 1);
    cache.activations.push_back(x);
    for (std::size_t n = 0; n < offsets.size(); ++n) {
        const auto& o = offsets[n];
        Eigen::VectorXd z = ConstMatMap(params.data() + o.weight, o.rows, o.cols) * cache.activations.back()
                            + ConstVecMap(params.data() + o.bias, o.rows);
        const bool hidden = n + 1 < offsets.size();
        if (hidden && spec.activation == Activation::tanh)
            z = z.array().tanh().matrix();
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

Eigen::VectorXd forward(const DenseNetSpec& spec, std::span<const double> params, const Eigen::VectorXd& x)
{
    return forward_cached(spec, params, x).output();
}

Eigen::VectorXd forward_vjp(const DenseNetSpec& spec, std::span<const double> params,
                            const ForwardCache& cache, const Eigen::VectorXd& output_adjoint,
                            std::span<double> param_grad)
{
    check_params(spec, params);
    if (param_grad.size() != params.size())
        throw ShapeMismatch("parameter gradient buffer has the wrong size");
    if (output_adjoint.size() != spec.output_size())
        throw ShapeMismatch("output adjoint has the wrong size");
    const auto offsets = layer_offsets(spec);
    Eigen::VectorXd delta = output_adjoint; // dL/dz^(n)
    for (std::size_t n = offsets.size(); n-- > 0;) {
        const auto& o = offsets[n];
        const Eigen::VectorXd& a_prev = cache.activations[n];
        MatMap(param_grad.data() + o.weight, o.rows, o.cols).noalias() += delta * a_prev.transpose();
        VecMap(param_grad.data() + o.bias, o.rows) += delta;
        Eigen::VectorXd upstream = ConstMatMap(params.data() + o.weight, o.rows, o.cols).transpose() * delta;
        if (n == 0)
            return upstream;
        delta = upstream.cwiseProduct(first_derivative(spec.activation, a_prev));
    }
    return delta; // unreachable for valid specs
}

Eigen::VectorXd input_gradient(const DenseNetSpec& spec, std::span<const double> params,
                               const ForwardCache& cache, int output_index)
{
    check_output_index(spec, output_index);
    const auto offsets = layer_offsets(spec);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(spec.output_size());
    delta[output_index] = 1.0;
    for (std::size_t n = offsets.size(); n-- > 0;) {
        const auto& o = offsets[n];
        Eigen::VectorXd upstream = ConstMatMap(params.data() + o.weight, o.rows, o.cols).transpose() * delta;
        if (n == 0)
            return upstream;
        delta = upstream.cwiseProduct(first_derivative(spec.activation, cache.activations[n]));
    }
    return delta;
}

Eigen::VectorXd grad_inputs(const DenseNetSpec& spec, std::span<const double> params,
                            const Eigen::VectorXd& x, int output_index)
{
    check_output_index(spec, output_index);
    return input_gradient(spec, params, forward_cached(spec, params, x), output_index);
}

// s(x, theta) = gbar . dy_k/dx is the forward-mode tangent of y_k in direction gbar.
// We replay that tangent pass and run reverse mode through both the primal activations
// and the tangent values.
Eigen::VectorXd input_gradient_vjp(const DenseNetSpec& spec, std::span<const double> params,
                                   const ForwardCache& cache, int output_index,
                                   const Eigen::VectorXd& grad_adjoint, std::span<double> param_grad)
{
    check_params(spec, params);
    check_output_index(spec, output_index);
    if (param_grad.size() != params.size())
        throw ShapeMismatch("parameter gradient buffer has the wrong size");
    if (grad_adjoint.size() != spec.input_size())
        throw ShapeMismatch("input-gradient adjoint has the wrong size");

    const auto offsets = layer_offsets(spec);
    const std::size_t L = offsets.size();

    // Tangent pass: t[0] = gbar, zdot[n] = W^(n) t[n-1], t[n] = sigma'(z^(n)) * zdot[n].
    std::vector<Eigen::VectorXd> tangent(L + 1);
    std::vector<Eigen::VectorXd> zdot(L + 1);
    std::vector<Eigen::VectorXd> sigma1(L);
    tangent[0] = grad_adjoint;
    for (std::size_t n = 1; n <= L; ++n) {
        const auto& o = offsets[n - 1];
        zdot[n] = ConstMatMap(params.data() + o.weight, o.rows, o.cols) * tangent[n - 1];
        if (n < L) {
            sigma1[n] = first_derivative(spec.activation, cache.activations[n]);
            tangent[n] = sigma1[n].cwiseProduct(zdot[n]);
        }
    }

    // Reverse pass. zdot_bar: adjoint of zdot[n]; z_bar: adjoint of the primal pre-activation z[n].
    Eigen::VectorXd zdot_bar = Eigen::VectorXd::Zero(spec.output_size());
    zdot_bar[output_index] = 1.0;
    Eigen::VectorXd z_bar; // empty at the output layer: s does not depend on z^(L)
    for (std::size_t n = L; n >= 1; --n) {
        const auto& o = offsets[n - 1];
        ConstMatMap W(params.data() + o.weight, o.rows, o.cols);
        MatMap W_bar(param_grad.data() + o.weight, o.rows, o.cols);
        W_bar.noalias() += zdot_bar * tangent[n - 1].transpose();
        Eigen::VectorXd t_bar = W.transpose() * zdot_bar;
        Eigen::VectorXd a_bar;
        if (z_bar.size() > 0) {
            W_bar.noalias() += z_bar * cache.activations[n - 1].transpose();
            VecMap(param_grad.data() + o.bias, o.rows) += z_bar;
            a_bar = W.transpose() * z_bar;
        }
        if (n == 1)
            return a_bar.size() > 0 ? a_bar : Eigen::VectorXd::Zero(spec.input_size());

        const Eigen::VectorXd sigma2 = second_derivative(spec.activation, cache.activations[n - 1]);
        zdot_bar = sigma1[n - 1].cwiseProduct(t_bar);
        Eigen::VectorXd next_z_bar = sigma2.cwiseProduct(zdot[n - 1]).cwiseProduct(t_bar);
        if (a_bar.size() > 0)
            next_z_bar += sigma1[n - 1].cwiseProduct(a_bar);
        z_bar = std::move(next_z_bar);
    }
    return Eigen::VectorXd::Zero(spec.input_size());
}

DenseNet::DenseNet(DenseNetSpec s, NetParams p) : spec(std::move(s)), params(std::move(p))
{
    spec.validate();
    check_params(spec, params);
}

DenseNet DenseNet::initialized(DenseNetSpec s, std::uint64_t seed)
{
    NetParams p = init_params(s, seed);
    return DenseNet(std::move(s), std::move(p));
}

} // namespace symml
