#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cmimh/tensor.hpp"

namespace cmimh {

// Reverse-mode tape over dense matrices. A Var is a node in an expression
// DAG; leaves hold parameters or constants, interior nodes record their
// producing op as a backward closure. Gradients accumulate in-place; callers
// zero them between optimization steps.
class Node;
using Var = std::shared_ptr<Node>;

class Node {
  public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    // Propagates this->grad into parents' grads. Empty for leaves.
    std::function<void(const Node&)> backprop;

    explicit Node(Tensor v, bool rg = false)
        : value(std::move(v)), grad(value.rows, value.cols), requires_grad(rg) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Trainable leaf.
Var leaf(Tensor v);
// Non-trainable leaf (inputs, masks, detached values).
Var constant(Tensor v);

enum class Axis { all, rows, cols };

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// Adds a 1xC row vector to every row of a (bias broadcast).
Var add_rowvec(const Var& a, const Var& bias);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double alpha = 0.01);
Var sigmoid(const Var& a);
Var log_(const Var& a);    // domain error on non-positive input
Var exp_(const Var& a);
Var softplus(const Var& a);
Var abs_(const Var& a);    // subgradient 0 at 0
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
// Clamp to [lo, hi]; backward passes gradient through unchanged.
Var clamp_st(const Var& a, double lo, double hi);
// Elementwise product with a fixed mask (no gradient into the mask).
Var mask_mul(const Var& a, const Tensor& mask);

Var reduce_sum(const Var& a, Axis axis = Axis::all);
Var reduce_mean(const Var& a, Axis axis = Axis::all);

// Forward: 1 where value >= 0 else 0. Backward: identity (straight-through).
Var ste_sign(const Var& a);

// Reverse-topological sweep from a scalar loss. Seeds the loss gradient
// with 1 and visits every reachable node exactly once.
void backward(const Var& loss);

// Zeroes grads of every node reachable from root.
void zero_all_grads(const Var& root);

}  // namespace cmimh
