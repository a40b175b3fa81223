#pragma once

#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "xflowdg/tensor.hpp"

namespace xflowdg {

/// Trainable tensor with an accumulated gradient of the same shape.
/// The name is the stable identifier used by checkpoints and the optimizer.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor::zeros(value.shape());
    }

    void zero_grad() { grad = Tensor::zeros(value.shape()); }
    std::size_t size() const { return value.size(); }
};

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over eager tensor ops. Single writer; build the graph
/// forward, call backward() once, then reset() before reuse. Gradients
/// accumulate into the bound Parameters and are also queryable per node.
class Tape {
public:
    enum class Op {
        Leaf,
        MatMul,
        Add,
        Sub,
        Mul,
        Scale,
        Relu,
        Tanh,
        Exp,
        Log,
        Sum,
        Mean,
        Concat,
        RowL2Norm,
        LogSumExp,
    };

    /// Leaf that does not require gradients (masks, time features, data).
    Var constant(Tensor v);
    /// Leaf whose gradient is tracked (loss inputs under grad_check).
    Var input(Tensor v);
    /// Leaf bound to a Parameter; backward() accumulates into p.grad.
    Var param(Parameter& p);

    Var matmul(Var a, Var b, bool ta = false, bool tb = false);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var relu(Var a);
    Var tanh(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var concat(Var a, Var b, int axis);
    Var row_l2_norm(Var a);
    Var log_sum_exp(Var a);

    /// Name-based dispatch over the primitive set. Binary ops take two
    /// inputs; unary ops one. concat concatenates along the last axis.
    Var forward(std::string_view op_name, const std::vector<Var>& inputs);

    const Tensor& value(Var v) const;

    /// Reverse sweep from `out`, seeded with `seed` (defaults to 1 for
    /// scalars). Every reachable Parameter accumulates its gradient;
    /// unreachable ones keep what they had (zero after zero_grad()).
    void backward(Var out, const Tensor& seed);
    void backward(Var out);

    /// Per-node gradient from the last backward() (zeros if unreached).
    Tensor grad_of(Var v) const;

    void reset();
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Op op = Op::Leaf;
        int a = -1;
        int b = -1;
        Tensor value;
        double factor = 0.0;  // Scale
        int axis = 0;         // Concat
        bool ta = false, tb = false;
        Parameter* bound = nullptr;
        bool needs_grad = false;
    };

    Var push(Node n);
    Var unary(Op op, Var a, Tensor value);
    void check_finite(const Tensor& t, const char* op) const;
    const Node& node(Var v) const;

    // deque, not vector: references returned by value() must survive
    // later op pushes (losses hold input shapes across graph building)
    std::deque<Node> nodes_;
    std::vector<Tensor> grads_;
    bool consumed_ = false;
};

/// Max relative gradient error of a scalar function against central
/// differences, taken over the coordinates of `point`:
///   max_i |analytic_i - numeric_i| / max(1, |analytic_i|, |numeric_i|)
/// `fn` must build a scalar node from the differentiated leaf.
double grad_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& point, double step = 1e-5);

/// Same check for a scalar graph differentiated w.r.t. one Parameter.
/// `build` must construct the full forward graph on the given tape.
double grad_check_param(const std::function<Var(Tape&)>& build, Parameter& p, double step = 1e-5);

}  // namespace xflowdg
