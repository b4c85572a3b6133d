#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "steam/tensor.hpp"

namespace steam {

using VarId = std::int32_t;

// Reverse-mode automatic differentiation over a linear tape. Operations are
// recorded in topological order as they execute; backward() seeds a scalar
// output with 1 and replays the tape in reverse, accumulating gradients into
// every node that requires them.
//
// One tape is single-threaded; distinct tapes may run on distinct threads.
class Tape {
public:
    VarId leaf(Tensor value, bool requires_grad = false);
    VarId constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& value(VarId v) const { return nodes_[static_cast<std::size_t>(v)].value; }
    bool requires_grad(VarId v) const { return nodes_[static_cast<std::size_t>(v)].requires_grad; }
    // valid after backward(); shaped like value(v)
    const std::vector<double>& grad(VarId v) const { return nodes_[static_cast<std::size_t>(v)].grad; }

    // loss must be a single-element tensor
    void backward(VarId loss);

    std::size_t size() const { return nodes_.size(); }

    // ---- elementwise / broadcasting ----
    VarId add(VarId a, VarId b);   // trailing-dim broadcasting
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);   // trailing-dim broadcasting
    VarId scale(VarId a, double s);
    VarId add_const(VarId a, double c);

    // ---- activations ----
    VarId sigmoid(VarId a);
    VarId tanh(VarId a);
    VarId relu(VarId a);

    // ---- shape ----
    VarId reshape(VarId a, Shape s);
    VarId concat_last(VarId a, VarId b);  // concatenate along the last axis

    // ---- reductions ----
    // mean over the given axes (removed from the shape, or kept as size 1)
    VarId mean(VarId a, std::vector<std::int64_t> axes, bool keepdims = false);
    VarId max_reduce(VarId a, std::vector<std::int64_t> axes, bool keepdims = false);
    VarId sum_all(VarId a);  // -> [1]

    // ---- dense linear algebra ----
    VarId matmul(VarId a, VarId b);  // [m,k] x [k,n]

    // softmax along `axis`, stabilized by max subtraction. Rows whose
    // maximum is below the mask sentinel threshold are rejected.
    VarId softmax(VarId a, std::int64_t axis);

    // ---- convolution ----
    // x: [N,Cin,H,W], w: [Cout,Cin,k,k]; cross-correlation convention
    VarId conv2d(VarId x, VarId w, std::int64_t stride, std::int64_t pad);

    // mean softmax cross-entropy of logits [B,K] against integer labels
    VarId cross_entropy(VarId logits, const std::vector<int>& labels);

    // Escape hatch for custom ops (used by graph attention): appends a node
    // with a precomputed value and a caller-supplied backward rule.
    VarId custom(Tensor value, bool requires_grad, std::function<void(Tape&, VarId)> backprop);

    std::vector<double>& grad_mut(VarId v) { return nodes_[static_cast<std::size_t>(v)].grad; }
    void ensure_grad(VarId v);

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        std::function<void(Tape&, VarId)> backprop;  // self id passed in
        bool requires_grad = false;
    };

    VarId push(Tensor value, bool requires_grad, std::function<void(Tape&, VarId)> backprop);

    std::vector<Node> nodes_;
};

// additive mask sentinel for excluded logits
inline constexpr double kMaskSentinel = -1e30;

}  // namespace steam
