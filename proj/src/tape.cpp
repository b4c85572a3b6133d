#include "steam/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "steam/flops.hpp"
#include "steam/kernels.hpp"

namespace steam {

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t nd = std::max(a.size(), b.size());
    Shape out(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        const std::int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        const std::int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (da != db && da != 1 && db != 1)
            throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

namespace {

// strides of `s` viewed as shape `out`, 0 on broadcast axes
std::vector<std::int64_t> broadcast_strides(const Shape& s, const Shape& out) {
    const auto own = row_major_strides(s);
    std::vector<std::int64_t> st(out.size(), 0);
    const std::size_t off = out.size() - s.size();
    for (std::size_t i = 0; i < s.size(); ++i)
        st[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : own[i];
    return st;
}

// Iterates the output index space, yielding (out_off, a_off, b_off).
template <typename F>
void for_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                   const std::vector<std::int64_t>& sb, F&& f) {
    const std::int64_t n = shape_numel(out);
    const std::size_t nd = out.size();
    std::vector<std::int64_t> idx(nd, 0);
    std::int64_t oa = 0, ob = 0;
    for (std::int64_t o = 0; o < n; ++o) {
        f(o, oa, ob);
        for (std::size_t ax = nd; ax-- > 0;) {
            if (++idx[ax] < out[ax]) {
                oa += sa[ax];
                ob += sb[ax];
                break;
            }
            oa -= sa[ax] * (out[ax] - 1);
            ob -= sb[ax] * (out[ax] - 1);
            idx[ax] = 0;
        }
    }
}

}  // namespace

VarId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&, VarId)> backprop) {
    nodes_.push_back(Node{std::move(value), {}, std::move(backprop), requires_grad});
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

VarId Tape::custom(Tensor value, bool requires_grad, std::function<void(Tape&, VarId)> backprop) {
    return push(std::move(value), requires_grad, std::move(backprop));
}

void Tape::ensure_grad(VarId v) {
    auto& n = nodes_[static_cast<std::size_t>(v)];
    if (n.grad.empty()) n.grad.assign(n.value.data.size(), 0.0);
}

void Tape::backward(VarId loss) {
    auto& out = nodes_[static_cast<std::size_t>(loss)];
    if (out.value.numel() != 1)
        throw DimensionError("backward requires a scalar loss, got shape " + shape_str(out.value.shape));
    for (auto& n : nodes_) n.grad.clear();
    ensure_grad(loss);
    out.grad[0] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(loss) + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (n.backprop && !n.grad.empty()) n.backprop(*this, static_cast<VarId>(i));
    }
}

// ---- elementwise with broadcasting ----

namespace {
// reduce grad of a broadcast output back onto an input
void scatter_broadcast(std::vector<double>& dst, const Shape& dst_shape,
                       const std::vector<double>& gout, const Shape& out_shape,
                       const double* other, const std::vector<std::int64_t>& other_strides,
                       bool multiply_other) {
    const auto sd = broadcast_strides(dst_shape, out_shape);
    std::vector<std::int64_t> so = other_strides;
    const std::size_t nd = out_shape.size();
    std::vector<std::int64_t> idx(nd, 0);
    std::int64_t od = 0, oo = 0;
    const std::int64_t n = shape_numel(out_shape);
    for (std::int64_t o = 0; o < n; ++o) {
        dst[static_cast<std::size_t>(od)] +=
            multiply_other ? gout[static_cast<std::size_t>(o)] * other[oo]
                           : gout[static_cast<std::size_t>(o)];
        for (std::size_t ax = nd; ax-- > 0;) {
            if (++idx[ax] < out_shape[ax]) {
                od += sd[ax];
                oo += so[ax];
                break;
            }
            od -= sd[ax] * (out_shape[ax] - 1);
            oo -= so[ax] * (out_shape[ax] - 1);
            idx[ax] = 0;
        }
    }
}
}  // namespace

VarId Tape::add(VarId a, VarId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Shape os = broadcast_shape(ta.shape, tb.shape);
    Tensor out = Tensor::zeros(os);
    const auto sa = broadcast_strides(ta.shape, os);
    const auto sb = broadcast_strides(tb.shape, os);
    for_broadcast(os, sa, sb, [&](std::int64_t o, std::int64_t oa, std::int64_t ob) {
        out[o] = ta[oa] + tb[ob];
    });
    flops::add(static_cast<std::uint64_t>(out.numel()));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b](Tape& t, VarId self) {
        const auto& g = t.grad(self);
        const Shape& os2 = t.value(self).shape;
        if (t.requires_grad(a)) {
            t.ensure_grad(a);
            std::vector<std::int64_t> zs(os2.size(), 0);
            scatter_broadcast(t.grad_mut(a), t.value(a).shape, g, os2, nullptr, zs, false);
        }
        if (t.requires_grad(b)) {
            t.ensure_grad(b);
            std::vector<std::int64_t> zs(os2.size(), 0);
            scatter_broadcast(t.grad_mut(b), t.value(b).shape, g, os2, nullptr, zs, false);
        }
    });
}

VarId Tape::sub(VarId a, VarId b) {
    return add(a, scale(b, -1.0));
}

VarId Tape::mul(VarId a, VarId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Shape os = broadcast_shape(ta.shape, tb.shape);
    Tensor out = Tensor::zeros(os);
    const auto sa = broadcast_strides(ta.shape, os);
    const auto sb = broadcast_strides(tb.shape, os);
    for_broadcast(os, sa, sb, [&](std::int64_t o, std::int64_t oa, std::int64_t ob) {
        out[o] = ta[oa] * tb[ob];
    });
    flops::add(static_cast<std::uint64_t>(out.numel()));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b](Tape& t, VarId self) {
        const auto& g = t.grad(self);
        const Shape& os2 = t.value(self).shape;
        if (t.requires_grad(a)) {
            t.ensure_grad(a);
            const auto sb2 = broadcast_strides(t.value(b).shape, os2);
            scatter_broadcast(t.grad_mut(a), t.value(a).shape, g, os2,
                              t.value(b).data.data(), sb2, true);
        }
        if (t.requires_grad(b)) {
            t.ensure_grad(b);
            const auto sa2 = broadcast_strides(t.value(a).shape, os2);
            scatter_broadcast(t.grad_mut(b), t.value(b).shape, g, os2,
                              t.value(a).data.data(), sa2, true);
        }
    });
}

VarId Tape::scale(VarId a, double s) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (auto& v : out.data) v *= s;
    flops::add(static_cast<std::uint64_t>(out.numel()));
    return push(std::move(out), requires_grad(a), [a, s](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        auto& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

VarId Tape::add_const(VarId a, double c) {
    Tensor out = value(a);
    for (auto& v : out.data) v += c;
    flops::add(static_cast<std::uint64_t>(out.numel()));
    return push(std::move(out), requires_grad(a), [a](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        auto& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

// ---- activations ----

VarId Tape::sigmoid(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    flops::add(static_cast<std::uint64_t>(out.numel()) * flops::kFlopsPerTranscendental);
    return push(std::move(out), requires_grad(a), [a](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        const auto& y = t.value(self).data;
        auto& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

VarId Tape::tanh(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::tanh(v);
    flops::add(static_cast<std::uint64_t>(out.numel()) * flops::kFlopsPerTranscendental);
    return push(std::move(out), requires_grad(a), [a](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        const auto& y = t.value(self).data;
        auto& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

VarId Tape::relu(VarId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    flops::add(static_cast<std::uint64_t>(out.numel()));
    return push(std::move(out), requires_grad(a), [a](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        const auto& x = t.value(a).data;
        auto& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

// ---- shape ----

VarId Tape::reshape(VarId a, Shape s) {
    const Tensor& ta = value(a);
    if (shape_numel(s) != ta.numel())
        throw DimensionError("reshape " + shape_str(ta.shape) + " -> " + shape_str(s) +
                             " changes element count");
    Tensor out(std::move(s), ta.data);
    return push(std::move(out), requires_grad(a), [a](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        auto& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

VarId Tape::concat_last(VarId a, VarId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.ndim() != tb.ndim())
        throw DimensionError("concat rank mismatch: " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    for (std::int64_t i = 0; i + 1 < ta.ndim(); ++i)
        if (ta.dim(i) != tb.dim(i))
            throw DimensionError("concat shape mismatch: " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    const std::int64_t la = ta.shape.back(), lb = tb.shape.back();
    Shape os = ta.shape;
    os.back() = la + lb;
    Tensor out = Tensor::zeros(os);
    const std::int64_t rows = ta.numel() / la;
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t i = 0; i < la; ++i) out[r * (la + lb) + i] = ta[r * la + i];
        for (std::int64_t i = 0; i < lb; ++i) out[r * (la + lb) + la + i] = tb[r * lb + i];
    }
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, la, lb, rows](Tape& t, VarId self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) {
            t.ensure_grad(a);
            auto& ga = t.grad_mut(a);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t i = 0; i < la; ++i) ga[static_cast<std::size_t>(r * la + i)] += g[static_cast<std::size_t>(r * (la + lb) + i)];
        }
        if (t.requires_grad(b)) {
            t.ensure_grad(b);
            auto& gb = t.grad_mut(b);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t i = 0; i < lb; ++i) gb[static_cast<std::size_t>(r * lb + i)] += g[static_cast<std::size_t>(r * (la + lb) + la + i)];
        }
    });
}

// ---- reductions ----

namespace {
struct ReducePlan {
    Shape out_shape;
    std::vector<std::int64_t> map;  // input offset -> output offset
    std::int64_t group = 1;         // elements per output
};

ReducePlan make_reduce_plan(const Shape& in, std::vector<std::int64_t> axes, bool keepdims) {
    std::sort(axes.begin(), axes.end());
    std::vector<bool> reduced(in.size(), false);
    for (auto ax : axes) {
        if (ax < 0 || ax >= static_cast<std::int64_t>(in.size()))
            throw DimensionError("reduce axis " + std::to_string(ax) + " out of range for " + shape_str(in));
        reduced[static_cast<std::size_t>(ax)] = true;
    }
    ReducePlan plan;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!reduced[i])
            plan.out_shape.push_back(in[i]);
        else {
            plan.group *= in[i];
            if (keepdims) plan.out_shape.push_back(1);
        }
    }
    if (plan.out_shape.empty()) plan.out_shape = {1};
    // output strides along non-reduced axes
    Shape squeezed;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (!reduced[i]) squeezed.push_back(in[i]);
    if (squeezed.empty()) squeezed = {1};
    const auto ostr = row_major_strides(squeezed);
    const std::int64_t n = shape_numel(in);
    plan.map.resize(static_cast<std::size_t>(n));
    std::vector<std::int64_t> idx(in.size(), 0);
    for (std::int64_t o = 0; o < n; ++o) {
        std::int64_t off = 0;
        std::size_t q = 0;
        for (std::size_t i = 0; i < in.size(); ++i)
            if (!reduced[i]) off += idx[i] * ostr[q++];
        plan.map[static_cast<std::size_t>(o)] = off;
        for (std::size_t ax = in.size(); ax-- > 0;) {
            if (++idx[ax] < in[ax]) break;
            idx[ax] = 0;
        }
    }
    return plan;
}
}  // namespace

VarId Tape::mean(VarId a, std::vector<std::int64_t> axes, bool keepdims) {
    const Tensor& ta = value(a);
    auto plan = make_reduce_plan(ta.shape, std::move(axes), keepdims);
    Tensor out = Tensor::zeros(plan.out_shape);
    for (std::int64_t i = 0; i < ta.numel(); ++i) out[plan.map[static_cast<std::size_t>(i)]] += ta[i];
    const double inv = 1.0 / static_cast<double>(plan.group);
    for (auto& v : out.data) v *= inv;
    flops::add(static_cast<std::uint64_t>(out.numel()));  // per output element
    const std::int64_t n_in = ta.numel();
    return push(std::move(out), requires_grad(a),
                [a, plan = std::move(plan), inv, n_in](Tape& t, VarId self) {
                    if (!t.requires_grad(a)) return;
                    t.ensure_grad(a);
                    const auto& g = t.grad(self);
                    auto& ga = t.grad_mut(a);
                    for (std::int64_t i = 0; i < n_in; ++i)
                        ga[static_cast<std::size_t>(i)] += inv * g[static_cast<std::size_t>(plan.map[static_cast<std::size_t>(i)])];
                });
}

VarId Tape::max_reduce(VarId a, std::vector<std::int64_t> axes, bool keepdims) {
    const Tensor& ta = value(a);
    auto plan = make_reduce_plan(ta.shape, std::move(axes), keepdims);
    Tensor out = Tensor::full(plan.out_shape, -std::numeric_limits<double>::infinity());
    std::vector<std::int64_t> argmax(out.data.size(), -1);
    for (std::int64_t i = 0; i < ta.numel(); ++i) {
        const auto o = plan.map[static_cast<std::size_t>(i)];
        if (ta[i] > out[o]) {
            out[o] = ta[i];
            argmax[static_cast<std::size_t>(o)] = i;
        }
    }
    flops::add(static_cast<std::uint64_t>(out.numel()));
    return push(std::move(out), requires_grad(a),
                [a, argmax = std::move(argmax)](Tape& t, VarId self) {
                    if (!t.requires_grad(a)) return;
                    t.ensure_grad(a);
                    const auto& g = t.grad(self);
                    auto& ga = t.grad_mut(a);
                    for (std::size_t o = 0; o < g.size(); ++o)
                        ga[static_cast<std::size_t>(argmax[o])] += g[o];
                });
}

VarId Tape::sum_all(VarId a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    flops::add(1);
    return push(Tensor::scalar(s), requires_grad(a), [a](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const double g = t.grad(self)[0];
        for (auto& v : t.grad_mut(a)) v += g;
    });
}

// ---- matmul ----

VarId Tape::matmul(VarId a, VarId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.ndim() != 2 || tb.ndim() != 2 || ta.dim(1) != tb.dim(0))
        throw DimensionError("matmul shape mismatch: " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
    const std::int64_t m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
    Tensor out = Tensor::zeros({m, n});
    kernels::matmul(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    flops::add(static_cast<std::uint64_t>(flops::kFlopsPerMac) * static_cast<std::uint64_t>(m * k * n));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, m, k, n](Tape& t, VarId self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) {
            t.ensure_grad(a);
            // dA += dC * B^T
            kernels::matmul_a_bt_accum(g.data(), t.value(b).data.data(), t.grad_mut(a).data(), m, n, k);
        }
        if (t.requires_grad(b)) {
            t.ensure_grad(b);
            // dB += A^T * dC
            kernels::matmul_at_b_accum(t.value(a).data.data(), g.data(), t.grad_mut(b).data(), m, k, n);
        }
    });
}

// ---- softmax ----

VarId Tape::softmax(VarId a, std::int64_t axis) {
    const Tensor& ta = value(a);
    if (axis < 0) axis += ta.ndim();
    if (axis < 0 || axis >= ta.ndim())
        throw DimensionError("softmax axis out of range for " + shape_str(ta.shape));
    const std::int64_t n = ta.dim(axis);
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t i = 0; i < axis; ++i) outer *= ta.dim(i);
    for (std::int64_t i = axis + 1; i < ta.ndim(); ++i) inner *= ta.dim(i);
    Tensor out = ta;
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            double* row = out.data.data() + o * n * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t i = 0; i < n; ++i) mx = std::max(mx, row[i * inner]);
            if (mx < kMaskSentinel * 0.5) throw EmptyNeighborhoodError();
            double denom = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                row[i * inner] = std::exp(row[i * inner] - mx);
                denom += row[i * inner];
            }
            for (std::int64_t i = 0; i < n; ++i) row[i * inner] /= denom;
        }
    }
    flops::add(static_cast<std::uint64_t>(flops::kFlopsPerSoftmaxEntry) * static_cast<std::uint64_t>(ta.numel()));
    return push(std::move(out), requires_grad(a), [a, n, outer, inner](Tape& t, VarId self) {
        if (!t.requires_grad(a)) return;
        t.ensure_grad(a);
        const auto& g = t.grad(self);
        const auto& y = t.value(self).data;
        auto& ga = t.grad_mut(a);
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * n * inner + in;
                double dot = 0.0;
                for (std::int64_t i = 0; i < n; ++i)
                    dot += g[static_cast<std::size_t>(base + i * inner)] * y[static_cast<std::size_t>(base + i * inner)];
                for (std::int64_t i = 0; i < n; ++i) {
                    const auto k = static_cast<std::size_t>(base + i * inner);
                    ga[k] += y[k] * (g[k] - dot);
                }
            }
        }
    });
}

// ---- conv2d ----

VarId Tape::conv2d(VarId x, VarId w, std::int64_t stride, std::int64_t pad) {
    const Tensor& tx = value(x);
    const Tensor& tw = value(w);
    if (tx.ndim() != 4 || tw.ndim() != 4 || tx.dim(1) != tw.dim(1))
        throw DimensionError("conv2d shape mismatch: x " + shape_str(tx.shape) + ", w " + shape_str(tw.shape));
    const std::int64_t n = tx.dim(0), cin = tx.dim(1), h = tx.dim(2), wd = tx.dim(3);
    const std::int64_t cout = tw.dim(0), kh = tw.dim(2), kw = tw.dim(3);
    const std::int64_t ho_num = h + 2 * pad - kh;
    const std::int64_t wo_num = wd + 2 * pad - kw;
    if (ho_num < 0 || wo_num < 0)
        throw DimensionError("conv2d kernel does not fit the padded input " +
                             shape_str(tx.shape) + ", kernel " + shape_str(tw.shape) +
                             ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
    const std::int64_t ho = ho_num / stride + 1, wo = wo_num / stride + 1;
    Tensor out = Tensor::zeros({n, cout, ho, wo});
    kernels::conv2d_forward(tx.data.data(), tw.data.data(), out.data.data(),
                            n, cin, h, wd, cout, kh, kw, stride, pad);
    flops::add(static_cast<std::uint64_t>(flops::kFlopsPerMac) *
               static_cast<std::uint64_t>(n * cout * ho * wo * cin * kh * kw));
    const bool rg = requires_grad(x) || requires_grad(w);
    return push(std::move(out), rg, [x, w, n, cin, h, wd, cout, kh, kw, stride, pad](Tape& t, VarId self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(x)) {
            t.ensure_grad(x);
            kernels::conv2d_backward_input(g.data(), t.value(w).data.data(), t.grad_mut(x).data(),
                                           n, cin, h, wd, cout, kh, kw, stride, pad);
        }
        if (t.requires_grad(w)) {
            t.ensure_grad(w);
            kernels::conv2d_backward_weight(g.data(), t.value(x).data.data(), t.grad_mut(w).data(),
                                            n, cin, h, wd, cout, kh, kw, stride, pad);
        }
    });
}

// ---- cross entropy ----

VarId Tape::cross_entropy(VarId logits, const std::vector<int>& labels) {
    const Tensor& tl = value(logits);
    if (tl.ndim() != 2 || tl.dim(0) != static_cast<std::int64_t>(labels.size()))
        throw DimensionError("cross_entropy expects logits [B,K] matching label count");
    const std::int64_t b = tl.dim(0), k = tl.dim(1);
    // stash softmax probabilities for the backward rule
    auto probs = std::make_shared<std::vector<double>>(tl.data);
    double loss = 0.0;
    for (std::int64_t i = 0; i < b; ++i) {
        double* row = probs->data() + i * k;
        double mx = row[0];
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            row[j] = std::exp(row[j] - mx);
            denom += row[j];
        }
        for (std::int64_t j = 0; j < k; ++j) row[j] /= denom;
        loss -= std::log(std::max(row[labels[static_cast<std::size_t>(i)]], 1e-300));
    }
    loss /= static_cast<double>(b);
    flops::add(static_cast<std::uint64_t>(tl.numel()) * flops::kFlopsPerSoftmaxEntry);
    return push(Tensor::scalar(loss), requires_grad(logits),
                [logits, labels, probs, b, k](Tape& t, VarId self) {
                    if (!t.requires_grad(logits)) return;
                    t.ensure_grad(logits);
                    const double g = t.grad(self)[0] / static_cast<double>(b);
                    auto& gl = t.grad_mut(logits);
                    for (std::int64_t i = 0; i < b; ++i)
                        for (std::int64_t j = 0; j < k; ++j) {
                            double p = (*probs)[static_cast<std::size_t>(i * k + j)];
                            if (j == labels[static_cast<std::size_t>(i)]) p -= 1.0;
                            gl[static_cast<std::size_t>(i * k + j)] += g * p;
                        }
                });
}

}  // namespace steam
