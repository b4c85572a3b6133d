#include "steam/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "steam/flops.hpp"

namespace steam {

GraphAttentionParams init_params(int d, int heads, Rng& rng, int f_in) {
    if (heads < 1 || d < 1) throw ParameterError("attention needs d >= 1 and H >= 1");
    if (d % heads != 0)
        throw ParameterError("head count " + std::to_string(heads) + " does not divide hidden dim " +
                             std::to_string(d));
    GraphAttentionParams p;
    p.heads = heads;
    p.d_k = d / heads;
    p.f_in = f_in;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(p.d_k));
    auto normal_fill = [&](Tensor& t) {
        for (auto& v : t.data) v = rng.normal(0.0, stddev);
    };
    p.w_k = Tensor::zeros({heads, p.d_k, f_in});
    p.w_q = Tensor::zeros({heads, p.d_k, f_in});
    p.b_k = Tensor::zeros({heads, p.d_k});
    p.b_q = Tensor::zeros({heads, p.d_k});
    normal_fill(p.w_k);
    normal_fill(p.w_q);
    return p;
}

AttentionParamVars bind_params(Tape& t, const GraphAttentionParams& p, bool requires_grad) {
    return AttentionParamVars{
        t.leaf(p.w_k, requires_grad),
        t.leaf(p.b_k, requires_grad),
        t.leaf(p.w_q, requires_grad),
        t.leaf(p.b_q, requires_grad),
    };
}

namespace {

// active neighborhoods in CSR form
struct Csr {
    std::vector<std::int64_t> row_ptr;
    std::vector<int> col;
};

Csr build_csr(const Graph& g, const EdgeDropMask* mask) {
    Csr csr;
    csr.row_ptr.assign(static_cast<std::size_t>(g.num_nodes) + 1, 0);
    for (int i = 0; i < g.num_nodes; ++i) {
        bool any = false;
        for (int j : g.neighbors[static_cast<std::size_t>(i)]) {
            if (mask && mask->drops(i, j)) continue;
            csr.col.push_back(j);
            any = true;
        }
        if (!any) throw EmptyNeighborhoodError();
        csr.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<std::int64_t>(csr.col.size());
    }
    return csr;
}

struct AttnStash {
    Csr csr;
    std::vector<double> keys;     // [B,H,N,dk]
    std::vector<double> queries;  // [B,H,N,dk]
    std::vector<double> attn;     // [B,H,nnz] per-head row softmax
    int heads = 0, d_k = 0, f_in = 0;
    std::int64_t batch = 0, n = 0;
    double scale = 1.0;
};

}  // namespace

VarId graph_attention_op(Tape& t, VarId features, VarId values,
                         const AttentionParamVars& pv,
                         const Graph& g, const EdgeDropMask* mask,
                         const AttentionOptions& opts, Tensor* attn_out) {
    const Tensor& x = t.value(features);
    const Tensor& v = t.value(values);
    const Tensor& wk = t.value(pv.w_k);
    const Tensor& bk = t.value(pv.b_k);
    const Tensor& wq = t.value(pv.w_q);
    const Tensor& bq = t.value(pv.b_q);

    if (x.ndim() != 3)
        throw DimensionError("attention features must be [B,N,F], got " + shape_str(x.shape));
    const std::int64_t b = x.dim(0), n = x.dim(1), f = x.dim(2);
    if (n != g.num_nodes)
        throw DimensionError("attention node count " + std::to_string(n) +
                             " does not match graph with " + std::to_string(g.num_nodes) + " nodes");
    if (v.ndim() != 2 || v.dim(0) != b || v.dim(1) != n)
        throw DimensionError("attention values must be [B,N] matching features, got " + shape_str(v.shape));
    const int heads = static_cast<int>(wk.dim(0));
    const int dk = static_cast<int>(wk.dim(1));
    if (wk.dim(2) != f)
        throw DimensionError("attention weight f_in " + std::to_string(wk.dim(2)) +
                             " does not match feature dim " + std::to_string(f));

    auto stash = std::make_shared<AttnStash>();
    stash->csr = build_csr(g, mask);
    stash->heads = heads;
    stash->d_k = dk;
    stash->f_in = static_cast<int>(f);
    stash->batch = b;
    stash->n = n;
    stash->scale = opts.sqrt_scaling ? std::sqrt(static_cast<double>(dk)) : static_cast<double>(dk);
    const std::int64_t nnz = static_cast<std::int64_t>(stash->csr.col.size());
    stash->keys.assign(static_cast<std::size_t>(b * heads * n * dk), 0.0);
    stash->queries.assign(static_cast<std::size_t>(b * heads * n * dk), 0.0);
    stash->attn.assign(static_cast<std::size_t>(b * heads * nnz), 0.0);

    Tensor out = Tensor::zeros({b, n});
    std::uint64_t fl = 0;

    for (std::int64_t bi = 0; bi < b; ++bi) {
        // projections
        for (int h = 0; h < heads; ++h) {
            for (std::int64_t i = 0; i < n; ++i) {
                for (int d = 0; d < dk; ++d) {
                    double key = bk[h * dk + d];
                    double query = bq[h * dk + d];
                    for (std::int64_t ff = 0; ff < f; ++ff) {
                        const double xv = x[(bi * n + i) * f + ff];
                        key += wk[(h * dk + d) * f + ff] * xv;
                        query += wq[(h * dk + d) * f + ff] * xv;
                    }
                    const auto base = static_cast<std::size_t>(((bi * heads + h) * n + i) * dk + d);
                    stash->keys[base] = key;
                    stash->queries[base] = query;
                }
                fl += 2 * (2 * static_cast<std::uint64_t>(f) * dk + dk);  // both projections
            }
        }
        // per-head masked softmax over neighborhoods
        for (int h = 0; h < heads; ++h) {
            const double* keys = stash->keys.data() + (bi * heads + h) * n * dk;
            const double* queries = stash->queries.data() + (bi * heads + h) * n * dk;
            double* attn = stash->attn.data() + (bi * heads + h) * nnz;
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t lo = stash->csr.row_ptr[static_cast<std::size_t>(i)];
                const std::int64_t hi = stash->csr.row_ptr[static_cast<std::size_t>(i) + 1];
                double mx = -std::numeric_limits<double>::infinity();
                for (std::int64_t e = lo; e < hi; ++e) {
                    const int j = stash->csr.col[static_cast<std::size_t>(e)];
                    double logit = 0.0;
                    for (int d = 0; d < dk; ++d) logit += keys[i * dk + d] * queries[j * dk + d];
                    logit /= stash->scale;
                    attn[e] = logit;
                    mx = std::max(mx, logit);
                    fl += 2 * static_cast<std::uint64_t>(dk) + 1;
                }
                double denom = 0.0;
                for (std::int64_t e = lo; e < hi; ++e) {
                    attn[e] = std::exp(attn[e] - mx);
                    denom += attn[e];
                }
                for (std::int64_t e = lo; e < hi; ++e) attn[e] /= denom;
                fl += static_cast<std::uint64_t>(flops::kFlopsPerSoftmaxEntry) * static_cast<std::uint64_t>(hi - lo);
            }
        }
        // head average and value aggregation
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t lo = stash->csr.row_ptr[static_cast<std::size_t>(i)];
            const std::int64_t hi = stash->csr.row_ptr[static_cast<std::size_t>(i) + 1];
            double acc = 0.0;
            for (std::int64_t e = lo; e < hi; ++e) {
                double abar = 0.0;
                for (int h = 0; h < heads; ++h) abar += stash->attn[(bi * heads + h) * nnz + e];
                abar /= heads;
                acc += abar * v[bi * n + stash->csr.col[static_cast<std::size_t>(e)]];
                fl += static_cast<std::uint64_t>(heads) + 2;
            }
            out[bi * n + i] = acc;
        }
    }
    flops::add(fl);

    if (attn_out) {
        if (b != 1) throw ParameterError("dense attention output is only available for batch size 1");
        *attn_out = Tensor::zeros({n, n});
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t lo = stash->csr.row_ptr[static_cast<std::size_t>(i)];
            const std::int64_t hi = stash->csr.row_ptr[static_cast<std::size_t>(i) + 1];
            for (std::int64_t e = lo; e < hi; ++e) {
                double abar = 0.0;
                for (int h = 0; h < heads; ++h) abar += stash->attn[static_cast<std::size_t>(h * nnz + e)];
                (*attn_out)[i * n + stash->csr.col[static_cast<std::size_t>(e)]] = abar / heads;
            }
        }
    }

    const bool rg = t.requires_grad(features) || t.requires_grad(values) ||
                    t.requires_grad(pv.w_k) || t.requires_grad(pv.b_k) ||
                    t.requires_grad(pv.w_q) || t.requires_grad(pv.b_q);
    return t.custom(std::move(out), rg, [features, values, pv, stash, nnz](Tape& tp, VarId self) {
        const auto& g = tp.grad(self);
        const Tensor& x = tp.value(features);
        const Tensor& v = tp.value(values);
        const Tensor& wk = tp.value(pv.w_k);
        const Tensor& wq = tp.value(pv.w_q);
        const std::int64_t b = stash->batch, n = stash->n;
        const int heads = stash->heads, dk = stash->d_k, f = stash->f_in;
        const double inv_scale = 1.0 / stash->scale;
        const double inv_heads = 1.0 / heads;

        const bool need_x = tp.requires_grad(features);
        const bool need_v = tp.requires_grad(values);
        const bool need_wk = tp.requires_grad(pv.w_k);
        const bool need_bk = tp.requires_grad(pv.b_k);
        const bool need_wq = tp.requires_grad(pv.w_q);
        const bool need_bq = tp.requires_grad(pv.b_q);
        if (need_x) tp.ensure_grad(features);
        if (need_v) tp.ensure_grad(values);
        if (need_wk) tp.ensure_grad(pv.w_k);
        if (need_bk) tp.ensure_grad(pv.b_k);
        if (need_wq) tp.ensure_grad(pv.w_q);
        if (need_bq) tp.ensure_grad(pv.b_q);

        std::vector<double> dkeys(static_cast<std::size_t>(heads * n * dk));
        std::vector<double> dqueries(static_cast<std::size_t>(heads * n * dk));

        for (std::int64_t bi = 0; bi < b; ++bi) {
            std::fill(dkeys.begin(), dkeys.end(), 0.0);
            std::fill(dqueries.begin(), dqueries.end(), 0.0);
            // through aggregation and head average into per-head softmax rows
            for (int h = 0; h < heads; ++h) {
                const double* attn = stash->attn.data() + (bi * heads + h) * nnz;
                const double* keys = stash->keys.data() + (bi * heads + h) * n * dk;
                const double* queries = stash->queries.data() + (bi * heads + h) * n * dk;
                double* dkh = dkeys.data() + h * n * dk;
                double* dqh = dqueries.data() + h * n * dk;
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::int64_t lo = stash->csr.row_ptr[static_cast<std::size_t>(i)];
                    const std::int64_t hi = stash->csr.row_ptr[static_cast<std::size_t>(i) + 1];
                    const double gi = g[static_cast<std::size_t>(bi * n + i)];
                    // da for this row, then softmax backward to de
                    double dot = 0.0;
                    for (std::int64_t e = lo; e < hi; ++e) {
                        const int j = stash->csr.col[static_cast<std::size_t>(e)];
                        const double da = gi * v[bi * n + j] * inv_heads;
                        dot += attn[e] * da;
                    }
                    for (std::int64_t e = lo; e < hi; ++e) {
                        const int j = stash->csr.col[static_cast<std::size_t>(e)];
                        const double da = gi * v[bi * n + j] * inv_heads;
                        const double de = attn[e] * (da - dot) * inv_scale;
                        for (int d = 0; d < dk; ++d) {
                            dkh[i * dk + d] += de * queries[j * dk + d];
                            dqh[j * dk + d] += de * keys[i * dk + d];
                        }
                    }
                }
            }
            // dv through the head-averaged matrix
            if (need_v) {
                auto& gv = tp.grad_mut(values);
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::int64_t lo = stash->csr.row_ptr[static_cast<std::size_t>(i)];
                    const std::int64_t hi = stash->csr.row_ptr[static_cast<std::size_t>(i) + 1];
                    const double gi = g[static_cast<std::size_t>(bi * n + i)];
                    for (std::int64_t e = lo; e < hi; ++e) {
                        double abar = 0.0;
                        for (int h = 0; h < heads; ++h) abar += stash->attn[(bi * heads + h) * nnz + e];
                        gv[static_cast<std::size_t>(bi * n + stash->csr.col[static_cast<std::size_t>(e)])] +=
                            gi * abar * inv_heads;
                    }
                }
            }
            // through the projections
            for (int h = 0; h < heads; ++h) {
                const double* dkh = dkeys.data() + h * n * dk;
                const double* dqh = dqueries.data() + h * n * dk;
                for (std::int64_t i = 0; i < n; ++i) {
                    for (int d = 0; d < dk; ++d) {
                        const double dki = dkh[i * dk + d];
                        const double dqi = dqh[i * dk + d];
                        if (need_bk) tp.grad_mut(pv.b_k)[static_cast<std::size_t>(h * dk + d)] += dki;
                        if (need_bq) tp.grad_mut(pv.b_q)[static_cast<std::size_t>(h * dk + d)] += dqi;
                        for (int ff = 0; ff < f; ++ff) {
                            const double xv = x[(bi * n + i) * f + ff];
                            if (need_wk)
                                tp.grad_mut(pv.w_k)[static_cast<std::size_t>((h * dk + d) * f + ff)] += dki * xv;
                            if (need_wq)
                                tp.grad_mut(pv.w_q)[static_cast<std::size_t>((h * dk + d) * f + ff)] += dqi * xv;
                            if (need_x)
                                tp.grad_mut(features)[static_cast<std::size_t>((bi * n + i) * f + ff)] +=
                                    dki * wk[(h * dk + d) * f + ff] + dqi * wq[(h * dk + d) * f + ff];
                        }
                    }
                }
            }
        }
    });
}

AttentionOutput graph_attention(const Tensor& x, const Graph& g,
                                const EdgeDropMask* mask,
                                const GraphAttentionParams& p,
                                const AttentionOptions& opts) {
    Tensor flat = x;
    if (flat.ndim() == 2 && flat.dim(1) == 1) flat = Tensor({flat.dim(0)}, flat.data);
    if (flat.ndim() != 1)
        throw DimensionError("graph_attention expects node features [N] or [N,1], got " + shape_str(x.shape));
    const std::int64_t n = flat.dim(0);
    if (p.f_in != 1)
        throw ParameterError("scalar graph_attention wrapper requires f_in == 1 parameters");

    Tape t;
    const VarId features = t.leaf(Tensor({1, n, 1}, flat.data));
    const VarId values = t.leaf(Tensor({1, n}, flat.data));
    const auto pv = bind_params(t, p, false);
    AttentionOutput out;
    const VarId updated = graph_attention_op(t, features, values, pv, g, mask, opts, &out.attn);
    out.updated = Tensor({n}, t.value(updated).data);
    return out;
}

}  // namespace steam
