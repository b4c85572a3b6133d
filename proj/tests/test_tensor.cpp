#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "steam/flops.hpp"
#include "steam/kernels.hpp"
#include "steam/rng.hpp"
#include "steam/tape.hpp"
#include "steam/tensor.hpp"
#include "steam/verify.hpp"

using namespace steam;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(s));
    for (auto& v : t.data) v = rng.normal() * scale;
    return t;
}

// gradcheck for a unary tape op reduced to a scalar by sum_all
void check_unary(const std::function<VarId(Tape&, VarId)>& op, Shape shape, double step = 1e-5,
                 double tol = 1e-4) {
    Rng rng(99);
    const Tensor x = random_tensor(shape, rng);
    auto fn = [&](const std::vector<Tensor>& in) {
        Tape t;
        const VarId v = t.leaf(in[0], true);
        return t.value(t.sum_all(op(t, v)))[0];
    };
    auto grads = [&](const std::vector<Tensor>& in) {
        Tape t;
        const VarId v = t.leaf(in[0], true);
        const VarId loss = t.sum_all(op(t, v));
        t.backward(loss);
        return std::vector<Tensor>{Tensor(in[0].shape, t.grad(v))};
    };
    const auto rep = verify::gradcheck(fn, grads, {x}, step, tol);
    INFO(rep.summary());
    CHECK(rep.pass);
}

void check_binary(const std::function<VarId(Tape&, VarId, VarId)>& op, Shape sa, Shape sb) {
    Rng rng(101);
    const Tensor a = random_tensor(std::move(sa), rng);
    const Tensor b = random_tensor(std::move(sb), rng);
    auto fn = [&](const std::vector<Tensor>& in) {
        Tape t;
        const VarId va = t.leaf(in[0], true);
        const VarId vb = t.leaf(in[1], true);
        return t.value(t.sum_all(t.tanh(op(t, va, vb))))[0];
    };
    auto grads = [&](const std::vector<Tensor>& in) {
        Tape t;
        const VarId va = t.leaf(in[0], true);
        const VarId vb = t.leaf(in[1], true);
        const VarId loss = t.sum_all(t.tanh(op(t, va, vb)));
        t.backward(loss);
        return std::vector<Tensor>{Tensor(in[0].shape, t.grad(va)), Tensor(in[1].shape, t.grad(vb))};
    };
    const auto rep = verify::gradcheck(fn, grads, {a, b});
    INFO(rep.summary());
    CHECK(rep.pass);
}

}  // namespace

TEST_CASE("tensor shape invariants") {
    CHECK_THROWS_AS(Tensor({2, 0}, {}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
    const Tensor t = Tensor::zeros({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.at({1, 2, 3}) == 0.0);
    CHECK(row_major_strides({2, 3, 4}) == std::vector<std::int64_t>{12, 4, 1});
}

TEST_CASE("broadcast shape") {
    CHECK(broadcast_shape({2, 3}, {3}) == Shape{2, 3});
    CHECK(broadcast_shape({4, 1, 5}, {2, 5}) == Shape{4, 2, 5});
    CHECK_THROWS_AS(broadcast_shape({2, 3}, {4}), DimensionError);
}

TEST_CASE("rng determinism and ranges") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(c.uniform_int(10) < 10);
    }
    const auto st = c.state();
    const double next = c.uniform();
    c.set_state(st);
    CHECK(c.uniform() == next);
}

TEST_CASE("softmax values") {
    Tape t;
    const VarId v = t.leaf(Tensor::vec({2.0, 3.0}));
    const Tensor& s = t.value(t.softmax(v, 0));
    CHECK(s[0] == doctest::Approx(0.26894).epsilon(1e-4));
    CHECK(s[1] == doctest::Approx(0.73106).epsilon(1e-4));
}

TEST_CASE("softmax rejects fully masked rows") {
    Tape t;
    const VarId v = t.leaf(Tensor({1, 2}, {kMaskSentinel, kMaskSentinel}));
    CHECK_THROWS_AS(t.softmax(v, 1), EmptyNeighborhoodError);
    CHECK_THROWS_WITH(t.softmax(v, 1), "empty neighborhood");
}

TEST_CASE("elementwise op gradients") {
    check_unary([](Tape& t, VarId v) { return t.sigmoid(v); }, {3, 4});
    check_unary([](Tape& t, VarId v) { return t.tanh(v); }, {3, 4});
    check_unary([](Tape& t, VarId v) { return t.relu(v); }, {3, 4});
    check_unary([](Tape& t, VarId v) { return t.scale(v, -1.7); }, {5});
    check_unary([](Tape& t, VarId v) { return t.add_const(v, 2.5); }, {5});
    check_unary([](Tape& t, VarId v) { return t.sigmoid(t.reshape(v, {12})); }, {3, 4});
}

TEST_CASE("broadcasting binary op gradients") {
    check_binary([](Tape& t, VarId a, VarId b) { return t.add(a, b); }, {2, 3, 4}, {3, 4});
    check_binary([](Tape& t, VarId a, VarId b) { return t.sub(a, b); }, {2, 3}, {2, 3});
    check_binary([](Tape& t, VarId a, VarId b) { return t.mul(a, b); }, {2, 3, 4}, {4});
    check_binary([](Tape& t, VarId a, VarId b) { return t.mul(a, b); }, {2, 1, 4}, {2, 3, 1});
    check_binary([](Tape& t, VarId a, VarId b) { return t.concat_last(a, b); }, {2, 3}, {2, 2});
}

TEST_CASE("reduction gradients") {
    check_unary([](Tape& t, VarId v) { return t.mean(v, {1}); }, {3, 4});
    check_unary([](Tape& t, VarId v) { return t.mean(v, {0, 2}, true); }, {2, 3, 4});
    check_unary([](Tape& t, VarId v) { return t.max_reduce(v, {1}); }, {3, 4});
    check_unary([](Tape& t, VarId v) { return t.max_reduce(v, {2, 3}); }, {2, 3, 4, 4});
}

TEST_CASE("matmul gradient") {
    check_binary([](Tape& t, VarId a, VarId b) { return t.matmul(a, b); }, {3, 4}, {4, 2});
}

TEST_CASE("softmax gradient") {
    // wrap in tanh: a bare row softmax sums to exactly 1, which would make
    // the scalar loss constant and the check vacuous
    check_unary([](Tape& t, VarId v) { return t.tanh(t.softmax(v, 1)); }, {3, 5});
    check_unary([](Tape& t, VarId v) { return t.tanh(t.softmax(v, 0)); }, {4, 3});
}

TEST_CASE("conv2d gradient") {
    check_binary([](Tape& t, VarId a, VarId b) { return t.conv2d(a, b, 1, 1); },
                 {2, 2, 5, 5}, {3, 2, 3, 3});
    check_binary([](Tape& t, VarId a, VarId b) { return t.conv2d(a, b, 2, 0); },
                 {1, 2, 6, 6}, {2, 2, 2, 2});
}

TEST_CASE("cross entropy gradient") {
    Rng rng(5);
    const Tensor logits = random_tensor({4, 6}, rng);
    const std::vector<int> labels{1, 0, 5, 3};
    auto fn = [&](const std::vector<Tensor>& in) {
        Tape t;
        return t.value(t.cross_entropy(t.leaf(in[0], true), labels))[0];
    };
    auto grads = [&](const std::vector<Tensor>& in) {
        Tape t;
        const VarId v = t.leaf(in[0], true);
        t.backward(t.cross_entropy(v, labels));
        return std::vector<Tensor>{Tensor(in[0].shape, t.grad(v))};
    };
    const auto rep = verify::gradcheck(fn, grads, {logits});
    INFO(rep.summary());
    CHECK(rep.pass);
}

TEST_CASE("parallel kernels match serial references") {
    Rng rng(11);
    const std::int64_t m = 7, k = 5, n = 6;
    const Tensor a = random_tensor({m, k}, rng);
    const Tensor b = random_tensor({k, n}, rng);
    std::vector<double> c1(static_cast<std::size_t>(m * n)), c2(c1.size());
    kernels::matmul(a.data.data(), b.data.data(), c1.data(), m, k, n);
    kernels::serial::matmul(a.data.data(), b.data.data(), c2.data(), m, k, n);
    CHECK(c1 == c2);  // bitwise

    const Tensor x = random_tensor({2, 3, 8, 8}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    std::vector<double> y1(2 * 4 * 8 * 8, 0.0), y2(y1.size(), 0.0);
    kernels::conv2d_forward(x.data.data(), w.data.data(), y1.data(), 2, 3, 8, 8, 4, 3, 3, 1, 1);
    kernels::serial::conv2d_forward(x.data.data(), w.data.data(), y2.data(), 2, 3, 8, 8, 4, 3, 3, 1, 1);
    CHECK(y1 == y2);
}

TEST_CASE("conv2d matches naive reference values") {
    // 1x1x3x3 input, 1x1x2x2 kernel, stride 1, no padding
    Tape t;
    const VarId x = t.leaf(Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    const VarId w = t.leaf(Tensor({1, 1, 2, 2}, {1, 0, 0, 1}));
    const Tensor& y = t.value(t.conv2d(x, w, 1, 0));
    CHECK(y.shape == Shape{1, 1, 2, 2});
    CHECK(y[0] == 6.0);   // 1+5
    CHECK(y[1] == 8.0);   // 2+6
    CHECK(y[2] == 12.0);  // 4+8
    CHECK(y[3] == 14.0);  // 5+9
}

TEST_CASE("flop counter tracks matmul and transcendentals") {
    Tape t;
    Rng rng(3);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    flops::Counter counter;
    const VarId p = t.matmul(t.leaf(a), t.leaf(b));
    CHECK(counter.total() == 2ull * 3 * 4 * 2);
    t.sigmoid(p);
    CHECK(counter.total() == 2ull * 3 * 4 * 2 + 4ull * 6);
}
