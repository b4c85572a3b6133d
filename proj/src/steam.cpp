#include "steam/steam.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "steam/flops.hpp"

namespace steam {

Arrangement arrangement_from_string(const std::string& s) {
    if (s == "ca-sa") return Arrangement::CaSa;
    if (s == "sa-ca") return Arrangement::SaCa;
    if (s == "ca+sa") return Arrangement::CaPlusSa;
    throw ConfigError("unknown arrangement '" + s + "' (expected ca-sa, sa-ca or ca+sa)");
}
std::string to_string(Arrangement a) {
    switch (a) {
        case Arrangement::CaSa: return "ca-sa";
        case Arrangement::SaCa: return "sa-ca";
        case Arrangement::CaPlusSa: return "ca+sa";
    }
    return "?";
}
Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "none") return Activation::None;
    throw ConfigError("unknown activation '" + s + "'");
}
std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::None: return "none";
    }
    return "?";
}
Pooling pooling_from_string(const std::string& s) {
    if (s == "avg") return Pooling::Avg;
    if (s == "max") return Pooling::Max;
    if (s == "avg+max" || s == "concat") return Pooling::AvgMaxConcat;
    throw ConfigError("unknown pooling '" + s + "'");
}
std::string to_string(Pooling p) {
    switch (p) {
        case Pooling::Avg: return "avg";
        case Pooling::Max: return "max";
        case Pooling::AvgMaxConcat: return "avg+max";
    }
    return "?";
}

void SteamConfig::validate() const {
    if (d < 1 || heads < 1 || d % heads != 0)
        throw ConfigError("steam config needs H >= 1 dividing d, got d=" + std::to_string(d) +
                          " H=" + std::to_string(heads));
    if (m < 2) throw ConfigError("steam config needs m >= 2, got " + std::to_string(m));
    if (channel_hops != 1 && channel_hops != 2)
        throw ConfigError("channel_hops must be 1 or 2");
}

namespace {
int pool_feature_dim(Pooling p) { return p == Pooling::AvgMaxConcat ? 2 : 1; }
}  // namespace

SteamUnit::SteamUnit(SteamConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    cia_params_ = init_params(cfg_.d, cfg_.heads, rng, pool_feature_dim(cfg_.channel_pool));
    sia_params_ = init_params(cfg_.d, cfg_.heads, rng, pool_feature_dim(cfg_.spatial_pool));
    spatial_graph_ = build_grid_spatial_graph(cfg_.m, cfg_.include_self_loops);
}

const Graph& SteamUnit::channel_graph(int c) {
    auto it = channel_graphs_.find(c);
    if (it == channel_graphs_.end())
        it = channel_graphs_.emplace(c, build_cyclic_channel_graph(c, cfg_.channel_hops,
                                                                   cfg_.include_self_loops)).first;
    return it->second;
}

// ---- standalone pooling primitives ----

namespace {

// Balanced-tree summation. Besides better conditioning, it makes the block
// average of a constant block exact for power-of-two block sizes, which in
// turn makes ogp an exact left inverse of upsample_repeat.
double pairwise_sum(const double* v, std::int64_t n) {
    if (n <= 2) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::int64_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace

Tensor ogp(const Tensor& x, int m) {
    if (x.ndim() != 3)
        throw DimensionError("ogp expects [C,H,W], got " + shape_str(x.shape));
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % m != 0 || w % m != 0)
        throw DimensionError("ogp requires H and W divisible by m: H=" + std::to_string(h) +
                             " W=" + std::to_string(w) + " m=" + std::to_string(m));
    const std::int64_t bh = h / m, bw = w / m;
    Tensor out = Tensor::zeros({m, m});
    std::vector<double> scratch(static_cast<std::size_t>(c * bh * bw));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < m; ++j) {
            std::size_t k = 0;
            for (std::int64_t ci = 0; ci < c; ++ci)
                for (std::int64_t y = i * bh; y < (i + 1) * bh; ++y)
                    for (std::int64_t z = j * bw; z < (j + 1) * bw; ++z)
                        scratch[k++] = x[(ci * h + y) * w + z];
            out[i * m + j] = pairwise_sum(scratch.data(), static_cast<std::int64_t>(k)) /
                             static_cast<double>(c * bh * bw);
        }
    return out;
}

Tensor upsample_repeat(const Tensor& s, std::int64_t h, std::int64_t w) {
    if (s.ndim() != 2 || s.dim(0) != s.dim(1))
        throw DimensionError("upsample_repeat expects a square [m,m] map, got " + shape_str(s.shape));
    const std::int64_t m = s.dim(0);
    if (h % m != 0 || w % m != 0)
        throw DimensionError("upsample_repeat requires H and W divisible by m: H=" + std::to_string(h) +
                             " W=" + std::to_string(w) + " m=" + std::to_string(m));
    const std::int64_t bh = h / m, bw = w / m;
    Tensor out = Tensor::zeros({h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t z = 0; z < w; ++z) out[y * w + z] = s[(y / bh) * m + z / bw];
    return out;
}

// ---- tape-level blocks ----

namespace {

// non-overlapping block average, [B,H,W] -> [B,m,m]
VarId block_avg_t(Tape& t, VarId x, int m) {
    const Tensor& tx = t.value(x);
    const std::int64_t b = tx.dim(0), h = tx.dim(1), w = tx.dim(2);
    if (h % m != 0 || w % m != 0)
        throw DimensionError("block pooling requires H and W divisible by m: H=" + std::to_string(h) +
                             " W=" + std::to_string(w) + " m=" + std::to_string(m));
    const std::int64_t bh = h / m, bw = w / m;
    Tensor out = Tensor::zeros({b, m, m});
    std::vector<double> scratch(static_cast<std::size_t>(bh * bw));
    for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < m; ++j) {
                std::size_t k = 0;
                for (std::int64_t y = i * bh; y < (i + 1) * bh; ++y)
                    for (std::int64_t z = j * bw; z < (j + 1) * bw; ++z)
                        scratch[k++] = tx[(bi * h + y) * w + z];
                out[(bi * m + i) * m + j] = pairwise_sum(scratch.data(), static_cast<std::int64_t>(k)) /
                                            static_cast<double>(bh * bw);
            }
    flops::add(static_cast<std::uint64_t>(out.numel()));
    return t.custom(std::move(out), t.requires_grad(x), [x, m, bh, bw, h, w, b](Tape& tp, VarId self) {
        if (!tp.requires_grad(x)) return;
        tp.ensure_grad(x);
        const auto& g = tp.grad(self);
        auto& gx = tp.grad_mut(x);
        const double inv = 1.0 / static_cast<double>(bh * bw);
        for (std::int64_t bi = 0; bi < b; ++bi)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t z = 0; z < w; ++z)
                    gx[static_cast<std::size_t>((bi * h + y) * w + z)] +=
                        inv * g[static_cast<std::size_t>((bi * m + y / bh) * m + z / bw)];
    });
}

// non-overlapping block max, [B,H,W] -> [B,m,m]
VarId block_max_t(Tape& t, VarId x, int m) {
    const Tensor& tx = t.value(x);
    const std::int64_t b = tx.dim(0), h = tx.dim(1), w = tx.dim(2);
    if (h % m != 0 || w % m != 0)
        throw DimensionError("block pooling requires H and W divisible by m: H=" + std::to_string(h) +
                             " W=" + std::to_string(w) + " m=" + std::to_string(m));
    const std::int64_t bh = h / m, bw = w / m;
    Tensor out = Tensor::zeros({b, m, m});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.data.size());
    for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < m; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                std::int64_t arg = -1;
                for (std::int64_t y = i * bh; y < (i + 1) * bh; ++y)
                    for (std::int64_t z = j * bw; z < (j + 1) * bw; ++z) {
                        const std::int64_t off = (bi * h + y) * w + z;
                        if (tx[off] > best) {
                            best = tx[off];
                            arg = off;
                        }
                    }
                out[(bi * m + i) * m + j] = best;
                (*argmax)[static_cast<std::size_t>((bi * m + i) * m + j)] = arg;
            }
    flops::add(static_cast<std::uint64_t>(out.numel()));
    return t.custom(std::move(out), t.requires_grad(x), [x, argmax](Tape& tp, VarId self) {
        if (!tp.requires_grad(x)) return;
        tp.ensure_grad(x);
        const auto& g = tp.grad(self);
        auto& gx = tp.grad_mut(x);
        for (std::size_t o = 0; o < g.size(); ++o) gx[static_cast<std::size_t>((*argmax)[o])] += g[o];
    });
}

// nearest-neighbor block replication, [B,m,m] -> [B,H,W]
VarId upsample_t(Tape& t, VarId s, std::int64_t h, std::int64_t w) {
    const Tensor& ts = t.value(s);
    const std::int64_t b = ts.dim(0), m = ts.dim(1);
    if (h % m != 0 || w % m != 0)
        throw DimensionError("upsample requires H and W divisible by m: H=" + std::to_string(h) +
                             " W=" + std::to_string(w) + " m=" + std::to_string(m));
    const std::int64_t bh = h / m, bw = w / m;
    Tensor out = Tensor::zeros({b, h, w});
    for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t z = 0; z < w; ++z)
                out[(bi * h + y) * w + z] = ts[(bi * m + y / bh) * m + z / bw];
    return t.custom(std::move(out), t.requires_grad(s), [s, m, bh, bw, h, w, b](Tape& tp, VarId self) {
        if (!tp.requires_grad(s)) return;
        tp.ensure_grad(s);
        const auto& g = tp.grad(self);
        auto& gs = tp.grad_mut(s);
        for (std::int64_t bi = 0; bi < b; ++bi)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t z = 0; z < w; ++z)
                    gs[static_cast<std::size_t>((bi * m + y / bh) * m + z / bw)] +=
                        g[static_cast<std::size_t>((bi * h + y) * w + z)];
    });
}

VarId apply_activation(Tape& t, VarId x, Activation a) {
    switch (a) {
        case Activation::Tanh: return t.tanh(x);
        case Activation::Relu: return t.relu(x);
        case Activation::Sigmoid: return t.sigmoid(x);
        case Activation::None: return x;
    }
    return x;
}

struct PooledFeatures {
    VarId features;  // [B,N,F]
    VarId values;    // [B,N]
};

// channel node features: spatial pooling of [B,C,H,W] down to [B,C,*]
PooledFeatures pool_channels(Tape& t, VarId x, Pooling mode) {
    const Tensor& tx = t.value(x);
    const std::int64_t b = tx.dim(0), c = tx.dim(1);
    PooledFeatures out{};
    switch (mode) {
        case Pooling::Avg: {
            const VarId avg = t.mean(x, {2, 3});
            out.values = avg;
            out.features = t.reshape(avg, {b, c, 1});
            break;
        }
        case Pooling::Max: {
            const VarId mx = t.max_reduce(x, {2, 3});
            out.values = mx;
            out.features = t.reshape(mx, {b, c, 1});
            break;
        }
        case Pooling::AvgMaxConcat: {
            const VarId avg = t.mean(x, {2, 3});
            const VarId mx = t.max_reduce(x, {2, 3});
            out.values = avg;
            out.features = t.concat_last(t.reshape(avg, {b, c, 1}), t.reshape(mx, {b, c, 1}));
            break;
        }
    }
    return out;
}

// spatial node features via OGP: [B,C,H,W] -> [B,m^2,*]; the inter-module
// activation is applied to the pooled features
PooledFeatures pool_spatial(Tape& t, VarId x, int m, Pooling mode, Activation act) {
    const Tensor& tx = t.value(x);
    const std::int64_t b = tx.dim(0);
    const std::int64_t n = static_cast<std::int64_t>(m) * m;
    PooledFeatures out{};
    switch (mode) {
        case Pooling::Avg: {
            VarId s = block_avg_t(t, t.mean(x, {1}), m);
            s = apply_activation(t, t.reshape(s, {b, n}), act);
            out.values = s;
            out.features = t.reshape(s, {b, n, 1});
            break;
        }
        case Pooling::Max: {
            VarId s = block_max_t(t, t.max_reduce(x, {1}), m);
            s = apply_activation(t, t.reshape(s, {b, n}), act);
            out.values = s;
            out.features = t.reshape(s, {b, n, 1});
            break;
        }
        case Pooling::AvgMaxConcat: {
            VarId sa = block_avg_t(t, t.mean(x, {1}), m);
            sa = apply_activation(t, t.reshape(sa, {b, n}), act);
            VarId sm = block_max_t(t, t.max_reduce(x, {1}), m);
            sm = apply_activation(t, t.reshape(sm, {b, n}), act);
            out.values = sa;
            out.features = t.concat_last(t.reshape(sa, {b, n, 1}), t.reshape(sm, {b, n, 1}));
            break;
        }
    }
    return out;
}

// sigmoid channel scores [B,C]
VarId channel_scores_t(Tape& t, VarId x, SteamUnit& unit, const SteamUnitVars& vars) {
    const Tensor& tx = t.value(x);
    if (tx.ndim() != 4)
        throw DimensionError("steam expects [B,C,H,W], got " + shape_str(tx.shape));
    const int c = static_cast<int>(tx.dim(1));
    if (c < 3) throw ParameterError("CIA needs at least 3 channels, got " + std::to_string(c));
    const auto pooled = pool_channels(t, x, unit.config().channel_pool);
    const VarId att = graph_attention_op(t, pooled.features, pooled.values, vars.cia,
                                         unit.channel_graph(c), nullptr, unit.config().attn_options());
    return t.sigmoid(att);
}

// sigmoid spatial scores upsampled to [B,1,H,W]
VarId spatial_scores_t(Tape& t, VarId x, SteamUnit& unit, const SteamUnitVars& vars,
                       bool training, Rng* rng) {
    const Tensor& tx = t.value(x);
    const std::int64_t b = tx.dim(0), h = tx.dim(2), w = tx.dim(3);
    const int m = unit.config().m;
    const auto pooled = pool_spatial(t, x, m, unit.config().spatial_pool, unit.config().inter_activation);
    EdgeDropMask mask;
    const EdgeDropMask* mask_ptr = nullptr;
    if (training && unit.config().edge_drop) {
        if (!rng) throw ParameterError("training with edge drop requires an RNG");
        mask = sample_edge_drop(unit.spatial_graph(), m, *rng);
        mask_ptr = &mask;
    }
    const VarId att = graph_attention_op(t, pooled.features, pooled.values, vars.sia,
                                         unit.spatial_graph(), mask_ptr, unit.config().attn_options());
    const VarId alpha_init = t.sigmoid(att);  // [B, m^2]
    const VarId up = upsample_t(t, t.reshape(alpha_init, {b, m, m}), h, w);
    return t.reshape(up, {b, 1, h, w});
}

}  // namespace

SteamUnitVars bind_unit(Tape& t, const SteamUnit& unit, bool requires_grad) {
    return SteamUnitVars{bind_params(t, unit.cia_params(), requires_grad),
                         bind_params(t, unit.sia_params(), requires_grad)};
}

CiaResult cia_t(Tape& t, VarId x, SteamUnit& unit, const SteamUnitVars& vars) {
    const Tensor& tx = t.value(x);
    const std::int64_t b = tx.dim(0), c = tx.dim(1);
    const VarId alpha_c = channel_scores_t(t, x, unit, vars);
    const VarId x_ref = t.mul(x, t.reshape(alpha_c, {b, c, 1, 1}));
    return CiaResult{x_ref, alpha_c};
}

VarId sia_t(Tape& t, VarId score_src, VarId target, VarId residual,
            SteamUnit& unit, const SteamUnitVars& vars, bool training, Rng* rng) {
    const VarId alpha_s = spatial_scores_t(t, score_src, unit, vars, training, rng);
    return t.add(residual, t.mul(target, alpha_s));
}

VarId steam_forward_t(Tape& t, VarId x, SteamUnit& unit, const SteamUnitVars& vars,
                      bool training, Rng* rng) {
    switch (unit.config().arrangement) {
        case Arrangement::CaSa: {
            const auto c = cia_t(t, x, unit, vars);
            return sia_t(t, c.x_ref, c.x_ref, x, unit, vars, training, rng);
        }
        case Arrangement::SaCa: {
            const VarId alpha_s = spatial_scores_t(t, x, unit, vars, training, rng);
            const VarId x_ref_s = t.mul(x, alpha_s);
            const Tensor& tx = t.value(x);
            const VarId alpha_c = channel_scores_t(t, x_ref_s, unit, vars);
            const VarId scaled = t.mul(x_ref_s, t.reshape(alpha_c, {tx.dim(0), tx.dim(1), 1, 1}));
            return t.add(x, scaled);
        }
        case Arrangement::CaPlusSa: {
            // both score sets from the original input, applied multiplicatively
            const VarId alpha_c = channel_scores_t(t, x, unit, vars);
            const VarId alpha_s = spatial_scores_t(t, x, unit, vars, training, rng);
            const Tensor& tx = t.value(x);
            const VarId scaled_c = t.mul(x, t.reshape(alpha_c, {tx.dim(0), tx.dim(1), 1, 1}));
            return t.add(x, t.mul(scaled_c, alpha_s));
        }
    }
    throw ConfigError("unhandled arrangement");
}

// ---- single-sample wrappers ----

namespace {
VarId leaf_batched(Tape& t, const Tensor& x) {
    if (x.ndim() != 3)
        throw DimensionError("expected a [C,H,W] map, got " + shape_str(x.shape));
    return t.leaf(Tensor({1, x.dim(0), x.dim(1), x.dim(2)}, x.data));
}
Tensor unbatch(const Tensor& x) {
    return Tensor(Shape(x.shape.begin() + 1, x.shape.end()), x.data);
}
}  // namespace

CiaOutput cia(const Tensor& x, SteamUnit& unit) {
    Tape t;
    const VarId xv = leaf_batched(t, x);
    const auto vars = bind_unit(t, unit, false);
    const auto r = cia_t(t, xv, unit, vars);
    return CiaOutput{unbatch(t.value(r.x_ref)), unbatch(t.value(r.alpha_c))};
}

Tensor sia(const Tensor& x_ref, const Tensor& x_orig, SteamUnit& unit, bool training, Rng* rng) {
    Tape t;
    const VarId ref = leaf_batched(t, x_ref);
    const VarId orig = leaf_batched(t, x_orig);
    const auto vars = bind_unit(t, unit, false);
    const VarId out = sia_t(t, ref, ref, orig, unit, vars, training, rng);
    return unbatch(t.value(out));
}

Tensor steam_forward(const Tensor& x, SteamUnit& unit, bool training, Rng* rng) {
    Tape t;
    const VarId xv = leaf_batched(t, x);
    const auto vars = bind_unit(t, unit, false);
    const VarId out = steam_forward_t(t, xv, unit, vars, training, rng);
    return unbatch(t.value(out));
}

}  // namespace steam
