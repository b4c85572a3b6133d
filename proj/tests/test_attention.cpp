#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "steam/attention.hpp"
#include "steam/verify.hpp"

using namespace steam;

namespace {

// H=1, d_K=1, unit weights, zero biases: logits reduce to x_i * x_j / 1
GraphAttentionParams identity_params() {
    GraphAttentionParams p;
    p.heads = 1;
    p.d_k = 1;
    p.f_in = 1;
    p.w_k = Tensor({1, 1, 1}, {1.0});
    p.b_k = Tensor({1, 1}, {0.0});
    p.w_q = Tensor({1, 1, 1}, {1.0});
    p.b_q = Tensor({1, 1}, {0.0});
    return p;
}

}  // namespace

TEST_CASE("three-node cycle with unit projections") {
    const Graph g = build_cyclic_channel_graph(3, 1);
    const Tensor x = Tensor::vec({1.0, 2.0, 3.0});
    const AttentionOutput out = graph_attention(x, g, nullptr, identity_params());
    // row 0 attends to {1,2} with logits [2,3]
    CHECK(out.updated[0] == doctest::Approx(2.73106).epsilon(1e-5));
    CHECK(out.attn[0 * 3 + 1] == doctest::Approx(0.26894).epsilon(1e-4));
    CHECK(out.attn[0 * 3 + 2] == doctest::Approx(0.73106).epsilon(1e-4));
    CHECK(out.attn[0 * 3 + 0] == 0.0);  // non-neighbor entries stay zero
}

TEST_CASE("parameter count is 4d per module") {
    Rng rng(1);
    const auto p = init_params(8, 4, rng);
    CHECK(p.d_k == 2);
    CHECK(p.count() == 32);
    const auto p2 = init_params(8, 2, rng, 2);
    CHECK(p2.count() == 2 * 2 * 4 * (2 + 1));
}

TEST_CASE("init rejects invalid head split") {
    Rng rng(1);
    CHECK_THROWS_AS(init_params(8, 3, rng), ParameterError);
}

TEST_CASE("rows are stochastic and masked entries zero") {
    Rng rng(3);
    const Graph g = build_grid_spatial_graph(5);
    const auto p = init_params(8, 4, rng);
    Tensor x = Tensor::zeros({25});
    for (auto& v : x.data) v = rng.normal();
    EdgeDropMask mask = sample_edge_drop(g, 5, rng);
    const AttentionOutput out = graph_attention(x, g, &mask, p);
    for (int i = 0; i < 25; ++i) {
        double row = 0.0;
        for (int j = 0; j < 25; ++j) {
            row += out.attn[i * 25 + j];
            const auto& nb = g.neighbors[static_cast<std::size_t>(i)];
            const bool neighbor = std::find(nb.begin(), nb.end(), j) != nb.end();
            if (!neighbor || mask.drops(i, j)) CHECK(out.attn[i * 25 + j] == 0.0);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sparse path equals dense oracle on random instances") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int c = 3 + static_cast<int>(rng.uniform_int(30));
        const Graph g = build_cyclic_channel_graph(c, c >= 5 && trial % 2 ? 2 : 1);
        const auto p = init_params(8, 4, rng);
        Tensor x = Tensor::zeros({c});
        for (auto& v : x.data) v = rng.normal();
        const AttentionOutput fast = graph_attention(x, g, nullptr, p);
        const AttentionOutput slow = verify::dense_attention_oracle(x, g, nullptr, p);
        for (std::int64_t i = 0; i < fast.updated.numel(); ++i)
            CHECK(fast.updated[i] == doctest::Approx(slow.updated[i]).epsilon(1e-10));
        for (std::int64_t i = 0; i < fast.attn.numel(); ++i)
            CHECK(std::abs(fast.attn[i] - slow.attn[i]) < 1e-10);
    }
}

TEST_CASE("scale divides by d_k, or sqrt(d_k) behind the flag") {
    const Graph g = build_cyclic_channel_graph(3, 1);
    const Tensor x = Tensor::vec({1.0, 2.0, 3.0});
    GraphAttentionParams p = identity_params();
    p.d_k = 1;  // scale 1 either way; use a crafted 4-d_k variant instead
    GraphAttentionParams p4;
    p4.heads = 1;
    p4.d_k = 4;
    p4.f_in = 1;
    p4.w_k = Tensor({1, 4, 1}, {1, 1, 1, 1});
    p4.b_k = Tensor({1, 4}, {0, 0, 0, 0});
    p4.w_q = Tensor({1, 4, 1}, {1, 1, 1, 1});
    p4.b_q = Tensor({1, 4}, {0, 0, 0, 0});
    const auto linear = graph_attention(x, g, nullptr, p4, {false});
    const auto sqrt_scaled = graph_attention(x, g, nullptr, p4, {true});
    // with d_k = 4 the two scalings differ: logits x_i*x_j*4 / 4 vs / 2
    const double l0 = 1.0 * 2.0, l1 = 1.0 * 3.0;           // linear scale: 4*x_i*x_j/4
    const double s0 = 2.0 * l0, s1 = 2.0 * l1;             // sqrt scale: 4*x_i*x_j/2
    const auto soft = [](double a, double b) { return std::exp(a) / (std::exp(a) + std::exp(b)); };
    CHECK(linear.attn[1] == doctest::Approx(soft(l0, l1)).epsilon(1e-10));
    CHECK(sqrt_scaled.attn[1] == doctest::Approx(soft(s0, s1)).epsilon(1e-10));
}

TEST_CASE("dropping a node's only edge raises the empty-neighborhood error") {
    // path-like situation via a custom mask on the 2x2 grid: corner 0 has
    // neighbors {1,2}; drop both directions is impossible by construction,
    // so use a hand-built mask that removes 1 and a graph where 0 only has 1
    Graph g;
    g.num_nodes = 2;
    g.neighbors = {{1}, {0}};
    EdgeDropMask mask;
    mask.active = true;
    mask.dropped = {std::optional<int>(1), std::nullopt};
    const Tensor x = Tensor::vec({1.0, 2.0});
    CHECK_THROWS_AS(graph_attention(x, g, &mask, identity_params()), EmptyNeighborhoodError);
    CHECK_THROWS_WITH(graph_attention(x, g, &mask, identity_params()), "empty neighborhood");
}

TEST_CASE("feature dimension must match parameters") {
    Tape t;
    const Graph g = build_cyclic_channel_graph(3, 1);
    const VarId feats = t.leaf(Tensor::zeros({1, 3, 2}));
    const VarId vals = t.leaf(Tensor::zeros({1, 3}));
    const auto pv = bind_params(t, identity_params(), false);
    CHECK_THROWS_AS(graph_attention_op(t, feats, vals, pv, g, nullptr), DimensionError);
}

TEST_CASE("weights are seed-deterministic with zero biases") {
    Rng a(42), b(42);
    const auto pa = init_params(8, 4, a);
    const auto pb = init_params(8, 4, b);
    CHECK(pa.w_k.data == pb.w_k.data);
    CHECK(pa.w_q.data == pb.w_q.data);
    for (double v : pa.b_k.data) CHECK(v == 0.0);
    for (double v : pa.b_q.data) CHECK(v == 0.0);
}
