#pragma once

#include "steam/graph.hpp"
#include "steam/rng.hpp"
#include "steam/tape.hpp"
#include "steam/tensor.hpp"

namespace steam {

// Per-head key/query projections of multi-head scaled dot-product graph
// attention. Node features are f_in-dimensional (1 for plain pooling,
// 2 for concatenated avg+max pooling); count() == 2*H*d_k*(f_in + 1),
// i.e. 4d for the default f_in = 1.
struct GraphAttentionParams {
    int heads = 1;
    int d_k = 1;
    int f_in = 1;
    Tensor w_k;  // [H, d_k, f_in]
    Tensor b_k;  // [H, d_k]
    Tensor w_q;  // [H, d_k, f_in]
    Tensor b_q;  // [H, d_k]

    std::int64_t count() const {
        return w_k.numel() + b_k.numel() + w_q.numel() + b_q.numel();
    }
};

struct AttentionOptions {
    // Eq. 1 divides logits by d_k; the conventional sqrt(d_k) variant is
    // available behind this flag.
    bool sqrt_scaling = false;
};

struct AttentionOutput {
    Tensor updated;  // [N] aggregated features
    Tensor attn;     // [N, N] head-averaged attention, 0 outside neighborhoods
};

// weights ~ Normal(0, 1/sqrt(d_k)), biases zero; deterministic per seed.
GraphAttentionParams init_params(int d, int heads, Rng& rng, int f_in = 1);

// Tape variables backing one parameter set.
struct AttentionParamVars {
    VarId w_k, b_k, w_q, b_q;
};

AttentionParamVars bind_params(Tape& t, const GraphAttentionParams& p, bool requires_grad = true);

// Sparse multi-head graph attention as a single tape op.
//   features: [B, N, f_in]  (key/query inputs)
//   values:   [B, N]        (raw scalar features aggregated by A)
// Per head h: logit(i,j) = (W_k x_i + b_k) . (W_q x_j + b_q) / scale for
// j in N_i minus dropped neighbors; per-row softmax; A = mean over heads;
// out = A v. Only neighbor entries are ever computed.
// If attn_out is non-null (and B == 1) the dense head-averaged matrix is
// materialized there.
VarId graph_attention_op(Tape& t, VarId features, VarId values,
                         const AttentionParamVars& pv,
                         const Graph& g, const EdgeDropMask* mask,
                         const AttentionOptions& opts = {},
                         Tensor* attn_out = nullptr);

// Convenience wrapper matching the scalar-feature contract: x is [N] or
// [N,1]; runs on a private tape, no gradients.
AttentionOutput graph_attention(const Tensor& x, const Graph& g,
                                const EdgeDropMask* mask,
                                const GraphAttentionParams& p,
                                const AttentionOptions& opts = {});

}  // namespace steam
