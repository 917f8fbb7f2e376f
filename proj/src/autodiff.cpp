#include "symml/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "symml/errors.hpp"

namespace symml {

namespace {
std::atomic<std::uint32_t> next_tape_id{1};
} // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

Tape::NetRef Tape::register_net(const DenseNetSpec& spec, std::span<const double> params)
{
    spec.validate();
    if (params.size() != spec.param_count())
        throw ShapeMismatch("registered parameters do not match the network spec");
    nets_.push_back({spec, params, param_count_});
    param_count_ += params.size();
    return NetRef{static_cast<std::uint32_t>(nets_.size() - 1)};
}

std::size_t Tape::param_offset(NetRef net) const
{
    if (net.id >= nets_.size())
        throw InvalidArgument("unknown network reference");
    return nets_[net.id].offset;
}

std::uint32_t Tape::check(Var v) const
{
    if (v.tape_id != id_ || v.index >= nodes_.size())
        throw GraphCycle("node argument does not precede the node being recorded");
    return v.index;
}

Tape::Var Tape::push(Node node)
{
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1), id_};
}

Tape::Var Tape::constant(Eigen::VectorXd value)
{
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::Var Tape::constant(double value)
{
    return constant(Eigen::VectorXd::Constant(1, value));
}

Tape::Var Tape::add(Var a, Var b)
{
    Node n;
    n.op = Op::add;
    n.a = check(a);
    n.b = check(b);
    if (nodes_[n.a].value.size() != nodes_[n.b].value.size())
        throw ShapeMismatch("add: operand sizes differ");
    n.value = nodes_[n.a].value + nodes_[n.b].value;
    return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b)
{
    Node n;
    n.op = Op::sub;
    n.a = check(a);
    n.b = check(b);
    if (nodes_[n.a].value.size() != nodes_[n.b].value.size())
        throw ShapeMismatch("sub: operand sizes differ");
    n.value = nodes_[n.a].value - nodes_[n.b].value;
    return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double c)
{
    Node n;
    n.op = Op::scale;
    n.a = check(a);
    n.c = c;
    n.value = c * nodes_[n.a].value;
    return push(std::move(n));
}

Tape::Var Tape::axpy(Var a, double c, Var b)
{
    Node n;
    n.op = Op::axpy;
    n.a = check(a);
    n.b = check(b);
    n.c = c;
    if (nodes_[n.a].value.size() != nodes_[n.b].value.size())
        throw ShapeMismatch("axpy: operand sizes differ");
    n.value = nodes_[n.a].value + c * nodes_[n.b].value;
    return push(std::move(n));
}

Tape::Var Tape::slice(Var a, int begin, int length)
{
    Node n;
    n.op = Op::slice;
    n.a = check(a);
    const auto& src = nodes_[n.a].value;
    if (begin < 0 || length < 0 || begin + length > src.size())
        throw ShapeMismatch("slice out of range");
    n.begin = begin;
    n.length = length;
    n.value = src.segment(begin, length);
    return push(std::move(n));
}

Tape::Var Tape::concat(Var a, Var b)
{
    Node n;
    n.op = Op::concat;
    n.a = check(a);
    n.b = check(b);
    const auto& va = nodes_[n.a].value;
    const auto& vb = nodes_[n.b].value;
    n.value.resize(va.size() + vb.size());
    n.value << va, vb;
    return push(std::move(n));
}

Tape::Var Tape::squared_norm(Var a)
{
    Node n;
    n.op = Op::squared_norm;
    n.a = check(a);
    n.value = Eigen::VectorXd::Constant(1, nodes_[n.a].value.squaredNorm());
    return push(std::move(n));
}

Tape::Var Tape::sum(Var a)
{
    Node n;
    n.op = Op::sum;
    n.a = check(a);
    n.value = Eigen::VectorXd::Constant(1, nodes_[n.a].value.sum());
    return push(std::move(n));
}

Tape::Var Tape::net_forward(NetRef net, Var x)
{
    if (net.id >= nets_.size())
        throw InvalidArgument("unknown network reference");
    Node n;
    n.op = Op::forward;
    n.a = check(x);
    n.net = net.id;
    const auto& entry = nets_[net.id];
    n.cache = forward_cached(entry.spec, entry.params, nodes_[n.a].value);
    n.value = n.cache.output();
    return push(std::move(n));
}

Tape::Var Tape::net_grad_inputs(NetRef net, Var x, int output_index)
{
    if (net.id >= nets_.size())
        throw InvalidArgument("unknown network reference");
    Node n;
    n.op = Op::grad_inputs;
    n.a = check(x);
    n.net = net.id;
    n.output_index = output_index;
    const auto& entry = nets_[net.id];
    if (output_index < 0 || output_index >= entry.spec.output_size())
        throw ShapeMismatch("output index out of range");
    n.cache = forward_cached(entry.spec, entry.params, nodes_[n.a].value);
    n.value = input_gradient(entry.spec, entry.params, n.cache, output_index);
    return push(std::move(n));
}

const Eigen::VectorXd& Tape::value(Var v) const
{
    return nodes_[check(v)].value;
}

double Tape::scalar(Var v) const
{
    const auto& val = value(v);
    if (val.size() != 1)
        throw ShapeMismatch("node is not a scalar");
    return val[0];
}

std::vector<double> Tape::grad_params(Var loss) const
{
    const std::uint32_t root = check(loss);
    if (nodes_[root].value.size() != 1)
        throw ShapeMismatch("grad_params needs a scalar loss");

    std::vector<double> grad(param_count_, 0.0);
    std::vector<Eigen::VectorXd> adj(root + 1);
    adj[root] = Eigen::VectorXd::Ones(1);

    auto accumulate = [&](std::uint32_t idx, const Eigen::VectorXd& contribution) {
        if (adj[idx].size() == 0)
            adj[idx] = contribution;
        else
            adj[idx] += contribution;
    };

    for (std::uint32_t i = root + 1; i-- > 0;) {
        if (adj[i].size() == 0)
            continue; // does not influence the loss
        const Node& n = nodes_[i];
        const Eigen::VectorXd& g = adj[i];
        switch (n.op) {
        case Op::constant:
            break;
        case Op::add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case Op::sub:
            accumulate(n.a, g);
            accumulate(n.b, -g);
            break;
        case Op::scale:
            accumulate(n.a, n.c * g);
            break;
        case Op::axpy:
            accumulate(n.a, g);
            accumulate(n.b, n.c * g);
            break;
        case Op::slice: {
            Eigen::VectorXd full = Eigen::VectorXd::Zero(nodes_[n.a].value.size());
            full.segment(n.begin, n.length) = g;
            accumulate(n.a, full);
            break;
        }
        case Op::concat: {
            const auto na = nodes_[n.a].value.size();
            const auto nb = nodes_[n.b].value.size();
            accumulate(n.a, g.head(na));
            accumulate(n.b, g.tail(nb));
            break;
        }
        case Op::squared_norm:
            accumulate(n.a, (2.0 * g[0]) * nodes_[n.a].value);
            break;
        case Op::sum:
            accumulate(n.a, Eigen::VectorXd::Constant(nodes_[n.a].value.size(), g[0]));
            break;
        case Op::forward: {
            const auto& e = nets_[n.net];
            std::span<double> pg(grad.data() + e.offset, e.params.size());
            accumulate(n.a, forward_vjp(e.spec, e.params, n.cache, g, pg));
            break;
        }
        case Op::grad_inputs: {
            const auto& e = nets_[n.net];
            std::span<double> pg(grad.data() + e.offset, e.params.size());
            accumulate(n.a, input_gradient_vjp(e.spec, e.params, n.cache, n.output_index, g, pg));
            break;
        }
        }
    }
    return grad;
}

std::vector<double> grad_params_through(const Tape& tape, Tape::Var loss)
{
    return tape.grad_params(loss);
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double eps)
{
    if (!(eps > 0.0))
        throw InvalidArgument("finite-difference step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double up = f(probe);
        probe[i] = orig - eps;
        const double down = f(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic, double eps)
{
    if (analytic.size() != x.size())
        throw ShapeMismatch("analytic gradient does not match x");
    const auto fd = central_difference(f, x, eps);
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        const double denom = std::max(std::abs(analytic[i]), 1e-8);
        worst = std::max(worst, std::abs(fd[i] - analytic[i]) / denom);
    }
    return worst;
}

} // namespace symml
