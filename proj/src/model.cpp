#include "steam/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "steam/flops.hpp"

namespace steam {

void StageSpec::validate() const {
    if (blocks_per_stage.empty()) throw ConfigError("stage spec needs at least one stage");
    if (channels_per_stage.size() != blocks_per_stage.size() ||
        spatial_per_stage.size() != blocks_per_stage.size())
        throw ConfigError("stage spec arrays must have equal length");
    for (std::size_t s = 0; s < blocks_per_stage.size(); ++s) {
        if (blocks_per_stage[s] < 1) throw ConfigError("stage block count must be >= 1");
        if (channels_per_stage[s] < 1) throw ConfigError("stage channel count must be >= 1");
        if (spatial_per_stage[s].first < 1 || spatial_per_stage[s].second < 1)
            throw ConfigError("stage spatial size must be >= 1");
    }
}

int PlacementPlan::total_units() const {
    int n = 0;
    for (int u : units_per_stage) n += u;
    return n;
}

std::string PlacementPlan::to_string() const {
    std::ostringstream os;
    for (std::size_t s = 0; s < units_per_stage.size(); ++s) {
        os << "stage " << s + 1 << ": " << units_per_stage[s] << " unit"
           << (units_per_stage[s] == 1 ? "" : "s") << " after block";
        if (units_per_stage[s] != 1) os << "s";
        for (std::size_t j = 0; j < insertion_indices[s].size(); ++j)
            os << (j ? ", " : " ") << insertion_indices[s][j];
        os << "\n";
    }
    return os.str();
}

PlacementPlan plan_placement(const std::vector<int>& blocks_per_stage) {
    PlacementPlan plan;
    for (int nb : blocks_per_stage) {
        if (nb < 1) throw ConfigError("stage block count must be >= 1");
        const int u = (nb + 3) / 4;
        std::vector<int> idx;
        for (int j = 1; j <= u; ++j)
            idx.push_back(static_cast<int>((static_cast<std::int64_t>(j) * nb + u - 1) / u));
        plan.units_per_stage.push_back(u);
        plan.insertion_indices.push_back(std::move(idx));
    }
    return plan;
}

PlacementPlan plan_placement(const StageSpec& spec) {
    spec.validate();
    return plan_placement(spec.blocks_per_stage);
}

std::int64_t count_params(const PlacementPlan& plan, int d) {
    return static_cast<std::int64_t>(plan.total_units()) * 8 * d;
}

namespace {

std::uint64_t act_cost(Activation a) {
    switch (a) {
        case Activation::Tanh:
        case Activation::Sigmoid: return flops::kFlopsPerTranscendental;
        case Activation::Relu: return 1;
        case Activation::None: return 0;
    }
    return 0;
}

// mirrors graph_attention_op's instrumentation for batch size 1
std::uint64_t attn_flops(std::uint64_t n, std::uint64_t nnz, std::uint64_t f,
                         std::uint64_t heads, std::uint64_t dk) {
    std::uint64_t fl = heads * n * 2 * (2 * f * dk + dk);       // per-head key+query projections
    fl += heads * nnz * (2 * dk + 1);                           // logits
    fl += heads * nnz * flops::kFlopsPerSoftmaxEntry;           // row softmax
    fl += nnz * (heads + 2);                                    // head average + aggregation
    return fl;
}

std::uint64_t pool_branches(Pooling p) { return p == Pooling::AvgMaxConcat ? 2 : 1; }

}  // namespace

std::uint64_t unit_flops(int c, int h, int w, const SteamConfig& cfg) {
    cfg.validate();
    const auto heads = static_cast<std::uint64_t>(cfg.heads);
    const auto dk = static_cast<std::uint64_t>(cfg.d / cfg.heads);
    const auto e = static_cast<std::uint64_t>(c) * h * w;
    const auto hw = static_cast<std::uint64_t>(h) * w;
    const auto m2 = static_cast<std::uint64_t>(cfg.m) * cfg.m;

    const Graph cg = build_cyclic_channel_graph(c, cfg.channel_hops, cfg.include_self_loops);
    const Graph sg = build_grid_spatial_graph(cfg.m, cfg.include_self_loops);

    // channel scores: spatial pooling, attention over the channel graph, sigmoid
    std::uint64_t fl = pool_branches(cfg.channel_pool) * static_cast<std::uint64_t>(c);
    fl += attn_flops(static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(cg.directed_edge_count()),
                     pool_branches(cfg.channel_pool), heads, dk);
    fl += flops::kFlopsPerTranscendental * static_cast<std::uint64_t>(c);

    // spatial scores: channel reduce + block pool, activation, grid attention, sigmoid
    fl += pool_branches(cfg.spatial_pool) * (hw + m2);
    fl += act_cost(cfg.inter_activation) * pool_branches(cfg.spatial_pool) * m2;
    fl += attn_flops(m2, static_cast<std::uint64_t>(sg.directed_edge_count()),
                     pool_branches(cfg.spatial_pool), heads, dk);
    fl += flops::kFlopsPerTranscendental * m2;

    // recalibration multiplies and the residual add (all arrangements)
    fl += 3 * e;
    return fl;
}

double count_flops(const PlacementPlan& plan, const StageSpec& spec, const SteamConfig& cfg) {
    spec.validate();
    if (plan.units_per_stage.size() != spec.stage_count())
        throw ConfigError("placement plan does not match stage spec");
    std::uint64_t fl = 0;
    for (std::size_t s = 0; s < spec.stage_count(); ++s)
        fl += static_cast<std::uint64_t>(plan.units_per_stage[s]) *
              unit_flops(spec.channels_per_stage[s], spec.spatial_per_stage[s].first,
                         spec.spatial_per_stage[s].second, cfg);
    return static_cast<double>(fl);
}

std::uint64_t measure_flops(const PlacementPlan& plan, const StageSpec& spec,
                            const SteamConfig& cfg, Rng& rng) {
    spec.validate();
    std::uint64_t total = 0;
    for (std::size_t s = 0; s < spec.stage_count(); ++s) {
        for (int u = 0; u < plan.units_per_stage[s]; ++u) {
            SteamUnit unit(cfg, rng);
            Tensor x = Tensor::zeros({spec.channels_per_stage[s], spec.spatial_per_stage[s].first,
                                      spec.spatial_per_stage[s].second});
            for (auto& v : x.data) v = rng.normal();
            flops::Counter counter;
            (void)steam_forward(x, unit, false, nullptr);
            total += counter.total();
        }
    }
    return total;
}

// ---- accounting ----

std::vector<AccountingRow> reference_param_table(const StageSpec& spec, int d,
                                                 std::optional<double> r,
                                                 std::optional<int> k) {
    spec.validate();
    std::vector<AccountingRow> rows;
    const auto stages = spec.stage_count();
    auto sum_over = [&](auto&& per_stage) {
        std::int64_t total = 0;
        for (std::size_t s = 0; s < stages; ++s)
            total += static_cast<std::int64_t>(spec.blocks_per_stage[s]) * per_stage(s);
        return total;
    };

    if (r) {
        rows.push_back({"SE", "(2/r) * sum_s N_s * C_s^2",
                        static_cast<std::int64_t>(std::llround(
                            2.0 / *r *
                            static_cast<double>(sum_over([&](std::size_t s) {
                                const auto c = static_cast<std::int64_t>(spec.channels_per_stage[s]);
                                return c * c;
                            }))))});
    }
    rows.push_back({"ECA", "sum_s N_s * |(log2 C_s + 1)/2|_odd", sum_over([&](std::size_t s) {
                        const double t = (std::log2(static_cast<double>(spec.channels_per_stage[s])) + 1.0) / 2.0;
                        return static_cast<std::int64_t>(2 * std::llround(std::floor(t / 2.0)) + 1);
                    })});
    rows.push_back({"GCT", "sum_s N_s", sum_over([](std::size_t) { return std::int64_t{1}; })});
    if (r && k) {
        rows.push_back({"CBAM", "sum_s N_s * (C_s^2 * 2/r + k^2)",
                        static_cast<std::int64_t>(std::llround(
                            static_cast<double>(sum_over([&](std::size_t s) {
                                const auto c = static_cast<std::int64_t>(spec.channels_per_stage[s]);
                                return static_cast<std::int64_t>(std::llround(
                                           static_cast<double>(c * c) * 2.0 / *r)) +
                                       static_cast<std::int64_t>(*k) * *k;
                            }))))});
    }
    rows.push_back({"MCA", "sum_s N_s * C_s * 2", sum_over([&](std::size_t s) {
                        return static_cast<std::int64_t>(spec.channels_per_stage[s]) * 2;
                    })});
    const PlacementPlan plan = plan_placement(spec);
    rows.push_back({"STEAM", "8d per unit, ceil(N_s/4) units per stage", count_params(plan, d)});
    return rows;
}

AccountingReport account(const StageSpec& spec, const SteamConfig& cfg,
                         std::optional<double> se_reduction, std::optional<int> cbam_kernel) {
    spec.validate();
    cfg.validate();
    const PlacementPlan plan = plan_placement(spec);
    AccountingReport rep;
    rep.units_per_stage = plan.units_per_stage;
    for (std::size_t s = 0; s < spec.stage_count(); ++s) {
        const auto p = static_cast<std::int64_t>(plan.units_per_stage[s]) * 8 * cfg.d;
        const auto f = static_cast<double>(plan.units_per_stage[s]) *
                       static_cast<double>(unit_flops(spec.channels_per_stage[s],
                                                      spec.spatial_per_stage[s].first,
                                                      spec.spatial_per_stage[s].second, cfg));
        rep.params_per_stage.push_back(p);
        rep.flops_per_stage.push_back(f);
        rep.added_params += p;
        rep.added_flops += f;
    }
    rep.comparison = reference_param_table(spec, cfg.d, se_reduction, cbam_kernel);
    return rep;
}

std::string AccountingReport::to_text() const {
    std::ostringstream os;
    os << "stage  units  params  flops\n";
    for (std::size_t s = 0; s < units_per_stage.size(); ++s)
        os << s + 1 << "      " << units_per_stage[s] << "      " << params_per_stage[s]
           << "     " << flops_per_stage[s] << "\n";
    os << "total added params: " << added_params << "\n";
    os << "total added GFLOPs: " << added_flops / 1e9 << "\n";
    if (!comparison.empty()) {
        os << "\nmodule params comparison:\n";
        for (const auto& row : comparison)
            os << "  " << row.module << ": " << row.params << "   [" << row.formula << "]\n";
    }
    return os.str();
}

std::string AccountingReport::to_csv() const {
    std::ostringstream os;
    os << "stage,units,params,flops\n";
    for (std::size_t s = 0; s < units_per_stage.size(); ++s)
        os << s + 1 << "," << units_per_stage[s] << "," << params_per_stage[s] << ","
           << flops_per_stage[s] << "\n";
    os << "total," << "" << "," << added_params << "," << added_flops << "\n";
    return os.str();
}

// ---- trainable CNN ----

int DeskCnn::add_param(const std::string& name, Shape shape, double stddev, Rng& rng) {
    NamedParam p;
    p.name = name;
    p.value = Tensor::zeros(shape);
    if (stddev > 0.0)
        for (auto& v : p.value.data) v = rng.normal() * stddev;
    p.velocity = Tensor::zeros(std::move(shape));
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

DeskCnn::DeskCnn(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)), plan_(plan_placement(cfg_.spec)) {
    cfg_.spec.validate();
    if (cfg_.steam) cfg_.steam->validate();
    const auto& spec = cfg_.spec;
    const int c0 = spec.channels_per_stage[0];

    stem_w_ = add_param("stem.w", {c0, cfg_.in_channels, 3, 3},
                        std::sqrt(2.0 / (9.0 * cfg_.in_channels)), rng);
    stem_b_ = add_param("stem.b", {c0, 1, 1}, 0.0, rng);

    int c_in = c0;
    for (std::size_t s = 0; s < spec.stage_count(); ++s) {
        const int c_out = spec.channels_per_stage[s];
        for (int b = 1; b <= spec.blocks_per_stage[s]; ++b) {
            BlockLayout lay;
            lay.stage = static_cast<int>(s);
            lay.block = b;
            lay.c_in = c_in;
            lay.c_out = c_out;
            lay.stride = (b == 1 && s > 0) ? 2 : 1;
            lay.projection_skip = lay.stride != 1 || c_in != c_out;
            const std::string pre =
                "stage" + std::to_string(s + 1) + ".block" + std::to_string(b) + ".";
            std::array<int, 6> bp{};
            bp[0] = add_param(pre + "conv1.w", {c_out, c_in, 3, 3}, std::sqrt(2.0 / (9.0 * c_in)), rng);
            bp[1] = add_param(pre + "conv1.b", {c_out, 1, 1}, 0.0, rng);
            bp[2] = add_param(pre + "conv2.w", {c_out, c_out, 3, 3}, std::sqrt(2.0 / (9.0 * c_out)), rng);
            bp[3] = add_param(pre + "conv2.b", {c_out, 1, 1}, 0.0, rng);
            if (lay.projection_skip) {
                bp[4] = add_param(pre + "skip.w", {c_out, c_in, 1, 1}, std::sqrt(2.0 / c_in), rng);
                bp[5] = add_param(pre + "skip.b", {c_out, 1, 1}, 0.0, rng);
            } else {
                bp[4] = bp[5] = -1;
            }
            if (cfg_.steam) {
                const auto& idx = plan_.insertion_indices[s];
                if (std::find(idx.begin(), idx.end(), b) != idx.end()) {
                    lay.steam_unit = static_cast<int>(units_.size());
                    units_.emplace_back(*cfg_.steam, rng);
                    const SteamUnit& u = units_.back();
                    std::array<int, 8> up{};
                    auto reg = [&](const std::string& n, const Tensor& v) {
                        NamedParam p;
                        p.name = pre + "steam." + n;
                        p.value = v;
                        p.velocity = Tensor::zeros(v.shape);
                        params_.push_back(std::move(p));
                        return static_cast<int>(params_.size()) - 1;
                    };
                    up[0] = reg("cia.w_k", u.cia_params().w_k);
                    up[1] = reg("cia.b_k", u.cia_params().b_k);
                    up[2] = reg("cia.w_q", u.cia_params().w_q);
                    up[3] = reg("cia.b_q", u.cia_params().b_q);
                    up[4] = reg("sia.w_k", u.sia_params().w_k);
                    up[5] = reg("sia.b_k", u.sia_params().b_k);
                    up[6] = reg("sia.w_q", u.sia_params().w_q);
                    up[7] = reg("sia.b_q", u.sia_params().b_q);
                    unit_params_.push_back(up);
                }
            }
            block_params_.push_back(bp);
            blocks_.push_back(lay);
            c_in = c_out;
        }
    }
    // small classifier init: the recalibration units can amplify features by
    // up to 2x per stage, and a full-scale classifier on top of that produces
    // first-batch logits large enough to destabilize training
    fc_w_ = add_param("fc.w", {c_in, cfg_.num_classes}, 0.01, rng);
    fc_b_ = add_param("fc.b", {cfg_.num_classes}, 0.0, rng);
}

VarId DeskCnn::forward(Tape& t, const Tensor& x, bool training, Rng* rng,
                       std::vector<VarId>* param_vars) {
    if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels)
        throw DimensionError("model input must be [B," + std::to_string(cfg_.in_channels) +
                             ",H,W], got " + shape_str(x.shape));
    const bool grad = param_vars != nullptr;
    std::vector<VarId> pv(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) pv[i] = t.leaf(params_[i].value, grad);
    if (param_vars) *param_vars = pv;

    VarId h = t.relu(t.add(t.conv2d(t.constant(x), pv[static_cast<std::size_t>(stem_w_)], 1, 1),
                           pv[static_cast<std::size_t>(stem_b_)]));
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& lay = blocks_[bi];
        const auto& bp = block_params_[bi];
        const VarId c1 = t.relu(t.add(t.conv2d(h, pv[static_cast<std::size_t>(bp[0])], lay.stride, 1),
                                      pv[static_cast<std::size_t>(bp[1])]));
        const VarId c2 = t.add(t.conv2d(c1, pv[static_cast<std::size_t>(bp[2])], 1, 1),
                               pv[static_cast<std::size_t>(bp[3])]);
        const VarId skip = lay.projection_skip
                               ? t.add(t.conv2d(h, pv[static_cast<std::size_t>(bp[4])], lay.stride, 0),
                                       pv[static_cast<std::size_t>(bp[5])])
                               : h;
        h = t.relu(t.add(c2, skip));
        if (lay.steam_unit >= 0) {
            const auto& up = unit_params_[static_cast<std::size_t>(lay.steam_unit)];
            SteamUnitVars vars;
            vars.cia = {pv[static_cast<std::size_t>(up[0])], pv[static_cast<std::size_t>(up[1])],
                        pv[static_cast<std::size_t>(up[2])], pv[static_cast<std::size_t>(up[3])]};
            vars.sia = {pv[static_cast<std::size_t>(up[4])], pv[static_cast<std::size_t>(up[5])],
                        pv[static_cast<std::size_t>(up[6])], pv[static_cast<std::size_t>(up[7])]};
            h = steam_forward_t(t, h, units_[static_cast<std::size_t>(lay.steam_unit)], vars,
                                training, rng);
        }
    }
    const VarId pooled = t.mean(h, {2, 3});
    return t.add(t.matmul(pooled, pv[static_cast<std::size_t>(fc_w_)]),
                 pv[static_cast<std::size_t>(fc_b_)]);
}

std::int64_t DeskCnn::param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

std::int64_t DeskCnn::steam_param_count() const {
    std::int64_t n = 0;
    for (const auto& up : unit_params_)
        for (int i : up) n += params_[static_cast<std::size_t>(i)].value.numel();
    return n;
}

std::uint64_t DeskCnn::config_digest() const {
    std::ostringstream os;
    os << cfg_.in_channels << "|" << cfg_.input_size.first << "x" << cfg_.input_size.second << "|"
       << cfg_.num_classes << "|";
    for (std::size_t s = 0; s < cfg_.spec.stage_count(); ++s)
        os << cfg_.spec.blocks_per_stage[s] << ":" << cfg_.spec.channels_per_stage[s] << ":"
           << cfg_.spec.spatial_per_stage[s].first << "x" << cfg_.spec.spatial_per_stage[s].second
           << ";";
    if (cfg_.steam) {
        const auto& c = *cfg_.steam;
        os << "steam[d=" << c.d << ",H=" << c.heads << ",arr=" << to_string(c.arrangement)
           << ",m=" << c.m << ",hops=" << c.channel_hops << ",drop=" << c.edge_drop
           << ",act=" << to_string(c.inter_activation) << ",cp=" << to_string(c.channel_pool)
           << ",sp=" << to_string(c.spatial_pool) << ",sqrt=" << c.sqrt_scaling
           << ",self=" << c.include_self_loops << "]";
    } else {
        os << "baseline";
    }
    std::uint64_t hash = 1469598103934665603ull;
    for (const char ch : os.str()) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 1099511628211ull;
    }
    return hash;
}

StageSpec resnet18_spec() {
    return {{2, 2, 2, 2}, {64, 128, 256, 512}, {{56, 56}, {28, 28}, {14, 14}, {7, 7}}};
}
StageSpec resnet50_spec() {
    return {{3, 4, 6, 3}, {256, 512, 1024, 2048}, {{56, 56}, {28, 28}, {14, 14}, {7, 7}}};
}
StageSpec resnet101_spec() {
    return {{3, 4, 23, 3}, {256, 512, 1024, 2048}, {{56, 56}, {28, 28}, {14, 14}, {7, 7}}};
}
StageSpec shufflenet_v2_spec() {
    return {{4, 8, 4}, {116, 232, 464}, {{28, 28}, {14, 14}, {7, 7}}};
}

}  // namespace steam
