#include "cmimh/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cmimh {

namespace {

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite())
        throw std::runtime_error(std::string(op) + ": non-finite result");
}

Var make(Tensor v, std::vector<Var> parents, std::function<void(const Node&)> bp,
         const char* op) {
    check_finite(v, op);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    auto n = std::make_shared<Node>(std::move(v), rg);
    if (rg) {
        n->parents = std::move(parents);
        n->backprop = std::move(bp);
    }
    return n;
}

// Pointwise unary op helper: f(x) forward, df(x, y) backward factor.
template <class F, class DF>
Var unary(const Var& a, F f, DF df, const char* op) {
    Tensor out(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a->value[i]);
    Var pa = a;
    return make(std::move(out), {a},
                [pa, df](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                        pa->grad[i] += self.grad[i] * df(pa->value[i], self.value[i]);
                },
                op);
}

}  // namespace

Var leaf(Tensor v) {
    auto n = std::make_shared<Node>(std::move(v), true);
    check_finite(n->value, "leaf");
    return n;
}

Var constant(Tensor v) {
    auto n = std::make_shared<Node>(std::move(v), false);
    check_finite(n->value, "constant");
    return n;
}

Var matmul(const Var& a, const Var& b) {
    if (a->value.cols != b->value.rows)
        throw std::invalid_argument("matmul: inner dimension mismatch");
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    Tensor out(A.rows, B.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double aik = A.data[i * A.cols + k];
            if (aik == 0.0) continue;
            const double* brow = &B.data[k * B.cols];
            double* orow = &out.data[i * B.cols];
            for (std::size_t j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
        }
    Var pa = a, pb = b;
    return make(std::move(out), {a, b},
                [pa, pb](const Node& self) {
                    const Tensor& G = self.grad;
                    const Tensor& A = pa->value;
                    const Tensor& B = pb->value;
                    // dA = G * B^T
                    if (pa->requires_grad)
                        for (std::size_t i = 0; i < A.rows; ++i)
                            for (std::size_t j = 0; j < B.cols; ++j) {
                                const double g = G.data[i * G.cols + j];
                                if (g == 0.0) continue;
                                for (std::size_t k = 0; k < A.cols; ++k)
                                    pa->grad.data[i * A.cols + k] += g * B.data[k * B.cols + j];
                            }
                    // dB = A^T * G
                    if (pb->requires_grad)
                        for (std::size_t i = 0; i < A.rows; ++i)
                            for (std::size_t k = 0; k < A.cols; ++k) {
                                const double aik = A.data[i * A.cols + k];
                                if (aik == 0.0) continue;
                                for (std::size_t j = 0; j < B.cols; ++j)
                                    pb->grad.data[k * B.cols + j] +=
                                        aik * G.data[i * G.cols + j];
                            }
                },
                "matmul");
}

Var transpose(const Var& a) {
    const Tensor& A = a->value;
    Tensor out(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) out.at(j, i) = A.at(i, j);
    Var pa = a;
    return make(std::move(out), {a},
                [pa](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.rows; ++i)
                        for (std::size_t j = 0; j < self.grad.cols; ++j)
                            pa->grad.at(j, i) += self.grad.at(i, j);
                },
                "transpose");
}

Var add(const Var& a, const Var& b) {
    require_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
    Var pa = a, pb = b;
    return make(std::move(out), {a, b},
                [pa, pb](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        pa->grad[i] += self.grad[i];
                        pb->grad[i] += self.grad[i];
                    }
                },
                "add");
}

Var sub(const Var& a, const Var& b) {
    require_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
    Var pa = a, pb = b;
    return make(std::move(out), {a, b},
                [pa, pb](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        pa->grad[i] += self.grad[i];
                        pb->grad[i] -= self.grad[i];
                    }
                },
                "sub");
}

Var mul(const Var& a, const Var& b) {
    require_shape(a->value, b->value, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
    Var pa = a, pb = b;
    return make(std::move(out), {a, b},
                [pa, pb](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i) {
                        pa->grad[i] += self.grad[i] * pb->value[i];
                        pb->grad[i] += self.grad[i] * pa->value[i];
                    }
                },
                "mul");
}

Var add_rowvec(const Var& a, const Var& bias) {
    if (bias->value.rows != 1 || bias->value.cols != a->value.cols)
        throw std::invalid_argument("add_rowvec: bias must be 1 x cols(a)");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) += bias->value[j];
    Var pa = a, pb = bias;
    return make(std::move(out), {a, bias},
                [pa, pb](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.rows; ++i)
                        for (std::size_t j = 0; j < self.grad.cols; ++j) {
                            pa->grad.at(i, j) += self.grad.at(i, j);
                            pb->grad[j] += self.grad.at(i, j);
                        }
                },
                "add_rowvec");
}

Var relu(const Var& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x >= 0.0 ? 1.0 : 0.0; }, "relu");
}

Var leaky_relu(const Var& a, double alpha) {
    return unary(
        a, [alpha](double x) { return x > 0.0 ? x : alpha * x; },
        [alpha](double x, double) { return x >= 0.0 ? 1.0 : alpha; }, "leaky_relu");
}

Var sigmoid(const Var& a) {
    return unary(
        a,
        [](double x) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        },
        [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var log_(const Var& a) {
    for (double v : a->value.data)
        if (v <= 0.0) throw std::domain_error("log: non-positive input");
    return unary(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; },
        "log");
}

Var exp_(const Var& a) {
    return unary(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, "exp");
}

Var softplus(const Var& a) {
    return unary(
        a,
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        },
        "softplus");
}

Var abs_(const Var& a) {
    return unary(
        a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }, "abs");
}

Var neg(const Var& a) {
    return unary(
        a, [](double x) { return -x; }, [](double, double) { return -1.0; }, "neg");
}

Var scale(const Var& a, double c) {
    return unary(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; }, "scale");
}

Var add_scalar(const Var& a, double c) {
    return unary(
        a, [c](double x) { return x + c; }, [](double, double) { return 1.0; }, "add_scalar");
}

Var clamp_st(const Var& a, double lo, double hi) {
    return unary(
        a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [](double, double) { return 1.0; }, "clamp_st");
}

Var mask_mul(const Var& a, const Tensor& mask) {
    require_shape(a->value, mask, "mask_mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    Var pa = a;
    Tensor m = mask;
    return make(std::move(out), {a},
                [pa, m](const Node& self) {
                    for (std::size_t i = 0; i < self.grad.size(); ++i)
                        pa->grad[i] += self.grad[i] * m[i];
                },
                "mask_mul");
}

Var reduce_sum(const Var& a, Axis axis) {
    const Tensor& A = a->value;
    if (A.size() == 0) throw std::invalid_argument("reduce: empty tensor");
    Tensor out;
    switch (axis) {
        case Axis::all: {
            out = Tensor(1, 1);
            for (double v : A.data) out[0] += v;
            break;
        }
        case Axis::rows: {  // collapse rows: result 1 x cols (column sums)
            out = Tensor(1, A.cols);
            for (std::size_t i = 0; i < A.rows; ++i)
                for (std::size_t j = 0; j < A.cols; ++j) out[j] += A.at(i, j);
            break;
        }
        case Axis::cols: {  // collapse cols: result rows x 1 (row sums)
            out = Tensor(A.rows, 1);
            for (std::size_t i = 0; i < A.rows; ++i)
                for (std::size_t j = 0; j < A.cols; ++j) out[i] += A.at(i, j);
            break;
        }
    }
    Var pa = a;
    return make(std::move(out), {a},
                [pa, axis](const Node& self) {
                    Tensor& G = pa->grad;
                    switch (axis) {
                        case Axis::all:
                            for (std::size_t i = 0; i < G.size(); ++i)
                                G[i] += self.grad[0];
                            break;
                        case Axis::rows:
                            for (std::size_t i = 0; i < G.rows; ++i)
                                for (std::size_t j = 0; j < G.cols; ++j)
                                    G.at(i, j) += self.grad[j];
                            break;
                        case Axis::cols:
                            for (std::size_t i = 0; i < G.rows; ++i)
                                for (std::size_t j = 0; j < G.cols; ++j)
                                    G.at(i, j) += self.grad[i];
                            break;
                    }
                },
                "reduce_sum");
}

Var reduce_mean(const Var& a, Axis axis) {
    const Tensor& A = a->value;
    if (A.size() == 0) throw std::invalid_argument("reduce: empty tensor");
    double n = 1.0;
    switch (axis) {
        case Axis::all: n = static_cast<double>(A.size()); break;
        case Axis::rows: n = static_cast<double>(A.rows); break;
        case Axis::cols: n = static_cast<double>(A.cols); break;
    }
    return scale(reduce_sum(a, axis), 1.0 / n);
}

Var ste_sign(const Var& a) {
    return unary(
        a, [](double x) { return x >= 0.0 ? 1.0 : 0.0; },
        [](double, double) { return 1.0; }, "ste_sign");
}

namespace {

void topo_visit(const Var& n, std::unordered_set<Node*>& seen, std::vector<Var>& order) {
    // Iterative post-order DFS; graphs can be deep at large batch sizes.
    std::vector<std::pair<Var, std::size_t>> stack{{n, 0}};
    while (!stack.empty()) {
        auto& [cur, idx] = stack.back();
        if (idx == 0 && !seen.insert(cur.get()).second) {
            stack.pop_back();
            continue;
        }
        if (idx < cur->parents.size()) {
            Var next = cur->parents[idx++];
            if (!seen.count(next.get())) stack.emplace_back(next, 0);
        } else {
            order.push_back(cur);
            stack.pop_back();
        }
    }
}

}  // namespace

void backward(const Var& loss) {
    if (loss->value.size() != 1)
        throw std::logic_error("backward: loss must be scalar");
    std::unordered_set<Node*> seen;
    std::vector<Var> order;
    topo_visit(loss, seen, order);
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

void zero_all_grads(const Var& root) {
    std::unordered_set<Node*> seen;
    std::vector<Var> order;
    topo_visit(root, seen, order);
    for (auto& n : order) n->zero_grad();
}

}  // namespace cmimh
