#include "xflowdg/autodiff.hpp"

#include <cmath>
#include <utility>

#include "xflowdg/errors.hpp"

namespace xflowdg {

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw StateError("invalid Var handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::check_finite(const Tensor& t, const char* op) const {
    if (!t.all_finite()) throw NumericError(std::string("non-finite output of ") + op);
}

Var Tape::constant(Tensor v) {
    Node n;
    n.value = std::move(v);
    return push(std::move(n));
}

Var Tape::input(Tensor v) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::param(Parameter& p) {
    Node n;
    n.value = p.value;
    n.bound = &p;
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::unary(Op op, Var a, Tensor value) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.value = std::move(value);
    n.needs_grad = node(a).needs_grad;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
    Node n;
    n.op = Op::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.ta = ta;
    n.tb = tb;
    n.value = xflowdg::matmul(node(a).value, node(b).value, ta, tb);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    check_finite(n.value, "matmul");
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.value = xflowdg::add(node(a).value, node(b).value);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    check_finite(n.value, "add");
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.value = xflowdg::sub(node(a).value, node(b).value);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    check_finite(n.value, "sub");
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    Node n;
    n.op = Op::Mul;
    n.a = a.id;
    n.b = b.id;
    n.value = xflowdg::mul(node(a).value, node(b).value);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    check_finite(n.value, "mul");
    return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a.id;
    n.factor = s;
    n.value = xflowdg::scale(node(a).value, s);
    n.needs_grad = node(a).needs_grad;
    check_finite(n.value, "scale");
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    Var v = unary(Op::Relu, a, xflowdg::relu(node(a).value));
    check_finite(node(v).value, "relu");
    return v;
}

Var Tape::tanh(Var a) {
    Var v = unary(Op::Tanh, a, xflowdg::tanh_t(node(a).value));
    check_finite(node(v).value, "tanh");
    return v;
}

Var Tape::exp(Var a) {
    Var v = unary(Op::Exp, a, xflowdg::exp_t(node(a).value));
    check_finite(node(v).value, "exp");
    return v;
}

Var Tape::log(Var a) {
    Var v = unary(Op::Log, a, xflowdg::log_t(node(a).value));
    check_finite(node(v).value, "log");
    return v;
}

Var Tape::sum(Var a) { return unary(Op::Sum, a, xflowdg::sum(node(a).value)); }

Var Tape::mean(Var a) { return unary(Op::Mean, a, xflowdg::mean(node(a).value)); }

Var Tape::concat(Var a, Var b, int axis) {
    Node n;
    n.op = Op::Concat;
    n.a = a.id;
    n.b = b.id;
    n.axis = axis;
    n.value = xflowdg::concat(node(a).value, node(b).value, axis);
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    return push(std::move(n));
}

Var Tape::row_l2_norm(Var a) {
    Var v = unary(Op::RowL2Norm, a, xflowdg::row_l2_norm(node(a).value));
    check_finite(node(v).value, "row_l2_norm");
    return v;
}

Var Tape::log_sum_exp(Var a) {
    Var v = unary(Op::LogSumExp, a, xflowdg::log_sum_exp(node(a).value));
    check_finite(node(v).value, "log_sum_exp");
    return v;
}

Var Tape::forward(std::string_view op_name, const std::vector<Var>& inputs) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n)
            throw ArgumentError(std::string(op_name) + " expects " + std::to_string(n) + " inputs");
    };
    if (op_name == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
    if (op_name == "add") { need(2); return add(inputs[0], inputs[1]); }
    if (op_name == "sub") { need(2); return sub(inputs[0], inputs[1]); }
    if (op_name == "mul") { need(2); return mul(inputs[0], inputs[1]); }
    if (op_name == "concat") {
        need(2);
        const int axis = node(inputs[0]).value.rank() == 2 ? 1 : 0;
        return concat(inputs[0], inputs[1], axis);
    }
    if (op_name == "relu") { need(1); return relu(inputs[0]); }
    if (op_name == "tanh") { need(1); return tanh(inputs[0]); }
    if (op_name == "exp") { need(1); return exp(inputs[0]); }
    if (op_name == "log") { need(1); return log(inputs[0]); }
    if (op_name == "sum") { need(1); return sum(inputs[0]); }
    if (op_name == "mean") { need(1); return mean(inputs[0]); }
    if (op_name == "scale") { need(1); return scale(inputs[0], 1.0); }
    if (op_name == "row-l2-norm") { need(1); return row_l2_norm(inputs[0]); }
    if (op_name == "log-sum-exp") { need(1); return log_sum_exp(inputs[0]); }
    throw ArgumentError("unknown op name: " + std::string(op_name));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

void Tape::backward(Var out) { backward(out, Tensor::scalar(1.0)); }

void Tape::backward(Var out, const Tensor& seed) {
    if (nodes_.empty()) throw StateError("backward on empty tape");
    if (consumed_) throw StateError("tape already consumed by backward; reset() before reuse");
    consumed_ = true;
    const Node& last = node(out);
    if (!seed.same_shape(last.value))
        throw DimensionError("seed shape " + seed.shape_str() + " does not match output " +
                             last.value.shape_str());

    grads_.assign(nodes_.size(), Tensor());
    auto grad_slot = [&](int id) -> Tensor& {
        Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (g.size() == 0 && nodes_[static_cast<std::size_t>(id)].value.size() != 0)
            g = Tensor::zeros(nodes_[static_cast<std::size_t>(id)].value.shape());
        return g;
    };
    auto touched = [&](int id) {
        const Tensor& g = grads_[static_cast<std::size_t>(id)];
        return g.size() != 0 || nodes_[static_cast<std::size_t>(id)].value.size() == 0;
    };

    grad_slot(out.id) = seed;

    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad || !touched(i)) continue;
        const Tensor& g = grads_[static_cast<std::size_t>(i)];
        switch (n.op) {
            case Op::Leaf:
                if (n.bound) n.bound->grad += g;
                break;
            case Op::MatMul: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& B = nodes_[static_cast<std::size_t>(n.b)].value;
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) {
                    Tensor da = n.ta ? xflowdg::matmul(B, g, n.tb, true)
                                     : xflowdg::matmul(g, B, false, !n.tb);
                    grad_slot(n.a) += da;
                }
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
                    Tensor db = n.tb ? xflowdg::matmul(g, A, true, n.ta)
                                     : xflowdg::matmul(A, g, !n.ta, false);
                    grad_slot(n.b) += db;
                }
                break;
            }
            case Op::Add: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& B = nodes_[static_cast<std::size_t>(n.b)].value;
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) grad_slot(n.a) += g;
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) {
                    if (B.same_shape(A)) {
                        grad_slot(n.b) += g;
                    } else {
                        // bias broadcast: column sums
                        Tensor& gb = grad_slot(n.b);
                        for (std::size_t r = 0; r < g.rows(); ++r)
                            for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
                    }
                }
                break;
            }
            case Op::Sub:
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) grad_slot(n.a) += g;
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) grad_slot(n.b) += xflowdg::scale(g, -1.0);
                break;
            case Op::Mul: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& B = nodes_[static_cast<std::size_t>(n.b)].value;
                if (nodes_[static_cast<std::size_t>(n.a)].needs_grad) grad_slot(n.a) += xflowdg::mul(g, B);
                if (nodes_[static_cast<std::size_t>(n.b)].needs_grad) grad_slot(n.b) += xflowdg::mul(g, A);
                break;
            }
            case Op::Scale:
                grad_slot(n.a) += xflowdg::scale(g, n.factor);
                break;
            case Op::Relu: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < A.size(); ++k)
                    if (A[k] > 0.0) ga[k] += g[k];
                break;
            }
            case Op::Tanh: {
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < n.value.size(); ++k)
                    ga[k] += g[k] * (1.0 - n.value[k] * n.value[k]);
                break;
            }
            case Op::Exp: {
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < n.value.size(); ++k) ga[k] += g[k] * n.value[k];
                break;
            }
            case Op::Log: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < A.size(); ++k) ga[k] += g[k] / A[k];
                break;
            }
            case Op::Sum: {
                const double gv = g.item();
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += gv;
                break;
            }
            case Op::Mean: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                const double gv = g.item() / static_cast<double>(A.size());
                Tensor& ga = grad_slot(n.a);
                for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += gv;
                break;
            }
            case Op::Concat: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& B = nodes_[static_cast<std::size_t>(n.b)].value;
                const bool ga_needed = nodes_[static_cast<std::size_t>(n.a)].needs_grad;
                const bool gb_needed = nodes_[static_cast<std::size_t>(n.b)].needs_grad;
                if (A.rank() == 1 || n.axis == 0) {
                    if (ga_needed) {
                        Tensor& ga = grad_slot(n.a);
                        for (std::size_t k = 0; k < A.size(); ++k) ga[k] += g[k];
                    }
                    if (gb_needed) {
                        Tensor& gb = grad_slot(n.b);
                        for (std::size_t k = 0; k < B.size(); ++k) gb[k] += g[A.size() + k];
                    }
                } else {
                    for (std::size_t r = 0; r < A.rows(); ++r) {
                        if (ga_needed) {
                            Tensor& ga = grad_slot(n.a);
                            for (std::size_t c = 0; c < A.cols(); ++c) ga.at(r, c) += g.at(r, c);
                        }
                        if (gb_needed) {
                            Tensor& gb = grad_slot(n.b);
                            for (std::size_t c = 0; c < B.cols(); ++c) gb.at(r, c) += g.at(r, A.cols() + c);
                        }
                    }
                }
                break;
            }
            case Op::RowL2Norm: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                for (std::size_t r = 0; r < A.rows(); ++r) {
                    const double nr = n.value[r];
                    if (nr == 0.0) throw NumericError("row_l2_norm gradient at zero-norm row " + std::to_string(r));
                    const double gr = g[r] / nr;
                    for (std::size_t c = 0; c < A.cols(); ++c) ga.at(r, c) += gr * A.at(r, c);
                }
                break;
            }
            case Op::LogSumExp: {
                const Tensor& A = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = grad_slot(n.a);
                if (A.rank() == 1) {
                    const double lse = n.value.item();
                    const double gv = g.item();
                    for (std::size_t k = 0; k < A.size(); ++k) ga[k] += gv * std::exp(A[k] - lse);
                } else {
                    for (std::size_t r = 0; r < A.rows(); ++r) {
                        const double lse = n.value[r];
                        const double gv = g[r];
                        for (std::size_t c = 0; c < A.cols(); ++c)
                            ga.at(r, c) += gv * std::exp(A.at(r, c) - lse);
                    }
                }
                break;
            }
        }
    }
}

Tensor Tape::grad_of(Var v) const {
    const Node& n = node(v);
    if (static_cast<std::size_t>(v.id) < grads_.size() && grads_[static_cast<std::size_t>(v.id)].size() != 0)
        return grads_[static_cast<std::size_t>(v.id)];
    return Tensor::zeros(n.value.shape());
}

void Tape::reset() {
    nodes_.clear();
    grads_.clear();
    consumed_ = false;
}

namespace {

double rel_err(double a, double b) {
    const double denom = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) / denom;
}

}  // namespace

double grad_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& point, double step) {
    if (step <= 0.0) throw ArgumentError("grad_check step must be > 0");

    Tape tape;
    Var x = tape.input(point);
    Var out = fn(tape, x);
    if (tape.value(out).size() != 1) throw ArgumentError("grad_check requires a scalar-valued function");
    tape.backward(out);
    const Tensor analytic = tape.grad_of(x);

    auto eval = [&](const Tensor& p) {
        Tape t;
        Var v = fn(t, t.input(p));
        const double y = t.value(v).item();
        if (!std::isfinite(y)) throw NumericError("grad_check: non-finite function value");
        return y;
    };

    double worst = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double keep = probe[i];
        probe[i] = keep + step;
        const double fp = eval(probe);
        probe[i] = keep - step;
        const double fm = eval(probe);
        probe[i] = keep;
        const double numeric = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    return worst;
}

double grad_check_param(const std::function<Var(Tape&)>& build, Parameter& p, double step) {
    if (step <= 0.0) throw ArgumentError("grad_check step must be > 0");

    p.zero_grad();
    {
        Tape tape;
        Var out = build(tape);
        if (tape.value(out).size() != 1) throw ArgumentError("grad_check requires a scalar-valued function");
        tape.backward(out);
    }
    const Tensor analytic = p.grad;

    auto eval = [&]() {
        Tape t;
        const double y = t.value(build(t)).item();
        if (!std::isfinite(y)) throw NumericError("grad_check: non-finite function value");
        return y;
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double keep = p.value[i];
        p.value[i] = keep + step;
        const double fp = eval();
        p.value[i] = keep - step;
        const double fm = eval();
        p.value[i] = keep;
        const double numeric = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    p.zero_grad();
    return worst;
}

}  // namespace xflowdg
