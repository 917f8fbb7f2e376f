#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "symml/dense_net.hpp"

namespace symml {

// Reverse-mode tape over vector-valued nodes. Besides elementwise algebra it records two
// network primitives: a forward pass and an input-gradient pass. Both carry exact
// vector-Jacobian products, so a scalar loss that contains input gradients can still be
// differentiated with respect to every registered network parameter.
//
// Nodes may only reference earlier nodes of the same tape, so the recorded graph is a DAG.
class Tape {
public:
    struct Var {
        std::uint32_t index = 0;
        std::uint32_t tape_id = 0;
    };
    struct NetRef {
        std::uint32_t id = 0;
    };

    Tape();

    // Registers a network; its parameters occupy a contiguous block of the gradient vector
    // returned by grad_params(), in registration order. `params` must outlive the tape.
    NetRef register_net(const DenseNetSpec& spec, std::span<const double> params);
    std::size_t param_count() const noexcept { return param_count_; }
    std::size_t param_offset(NetRef net) const;

    Var constant(Eigen::VectorXd value);
    Var constant(double value);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double c);
    Var axpy(Var a, double c, Var b); // a + c * b
    Var slice(Var a, int begin, int length);
    Var concat(Var a, Var b);
    Var squared_norm(Var a);          // scalar
    Var sum(Var a);                   // scalar

    Var net_forward(NetRef net, Var x);
    Var net_grad_inputs(NetRef net, Var x, int output_index);

    const Eigen::VectorXd& value(Var v) const;
    double scalar(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Gradient of a scalar node with respect to all registered parameters, including
    // the contributions that flow through input-gradient nodes.
    std::vector<double> grad_params(Var loss) const;

private:
    enum class Op : std::uint8_t {
        constant, add, sub, scale, axpy, slice, concat, squared_norm, sum, forward, grad_inputs
    };

    struct Node {
        Op op = Op::constant;
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        double c = 0.0;
        int begin = 0;
        int length = 0;
        std::uint32_t net = 0;
        int output_index = 0;
        Eigen::VectorXd value;
        ForwardCache cache;
    };

    struct NetEntry {
        DenseNetSpec spec;
        std::span<const double> params;
        std::size_t offset;
    };

    std::uint32_t check(Var v) const;
    Var push(Node node);

    std::uint32_t id_;
    std::vector<Node> nodes_;
    std::vector<NetEntry> nets_;
    std::size_t param_count_ = 0;
};

// Gradient of a scalar built from network nodes with respect to all registered
// parameters. Thin wrapper over Tape::grad_params for callers holding a finished graph.
std::vector<double> grad_params_through(const Tape& tape, Tape::Var loss);

// Central-difference gradient of f at x.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double eps);

// Max over components of |fd_i - analytic_i| / max(|analytic_i|, 1e-8).
double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic, double eps);

} // namespace symml
