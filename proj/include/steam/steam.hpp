#pragma once

#include <map>
#include <string>

#include "steam/attention.hpp"
#include "steam/graph.hpp"
#include "steam/rng.hpp"
#include "steam/tape.hpp"

namespace steam {

enum class Arrangement { CaSa, SaCa, CaPlusSa };
enum class Activation { Tanh, Relu, Sigmoid, None };
enum class Pooling { Avg, Max, AvgMaxConcat };

Arrangement arrangement_from_string(const std::string& s);
std::string to_string(Arrangement a);
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
Pooling pooling_from_string(const std::string& s);
std::string to_string(Pooling p);

struct SteamConfig {
    int d = 8;
    int heads = 4;
    Arrangement arrangement = Arrangement::CaSa;
    int m = 7;
    int channel_hops = 1;
    bool edge_drop = true;
    Activation inter_activation = Activation::Tanh;
    Pooling channel_pool = Pooling::Avg;
    Pooling spatial_pool = Pooling::Avg;
    bool sqrt_scaling = false;
    bool include_self_loops = false;

    void validate() const;
    AttentionOptions attn_options() const { return {sqrt_scaling}; }
};

// One STEAM unit: CIA and SIA parameter sets plus cached topologies.
// Trainable parameter count is 8d with the default pooling, independent of
// the tensor sizes the unit is applied to.
class SteamUnit {
public:
    SteamUnit(SteamConfig cfg, Rng& rng);

    const SteamConfig& config() const { return cfg_; }
    GraphAttentionParams& cia_params() { return cia_params_; }
    GraphAttentionParams& sia_params() { return sia_params_; }
    const GraphAttentionParams& cia_params() const { return cia_params_; }
    const GraphAttentionParams& sia_params() const { return sia_params_; }

    std::int64_t param_count() const { return cia_params_.count() + sia_params_.count(); }

    const Graph& channel_graph(int c);   // built lazily per C, cached
    const Graph& spatial_graph() const { return spatial_graph_; }

private:
    SteamConfig cfg_;
    GraphAttentionParams cia_params_;
    GraphAttentionParams sia_params_;
    Graph spatial_graph_;
    std::map<int, Graph> channel_graphs_;
};

// ---- standalone pooling primitives ----

// Channel-mean then non-overlapping block average down to m x m.
// x: [C,H,W]; requires H % m == 0 and W % m == 0.
Tensor ogp(const Tensor& x, int m);

// Nearest-neighbor block replication of an m x m map up to H x W; the exact
// inverse of single-channel ogp.
Tensor upsample_repeat(const Tensor& s, std::int64_t h, std::int64_t w);

// ---- tape-level building blocks (batched; x is [B,C,H,W]) ----

struct CiaResult {
    VarId x_ref;    // [B,C,H,W]
    VarId alpha_c;  // [B,C]
};

// Tape vars for a unit's parameters, bound once per forward.
struct SteamUnitVars {
    AttentionParamVars cia;
    AttentionParamVars sia;
};
SteamUnitVars bind_unit(Tape& t, const SteamUnit& unit, bool requires_grad = true);

CiaResult cia_t(Tape& t, VarId x, SteamUnit& unit, const SteamUnitVars& vars);

// alpha scores from the spatial path of `score_src`; recalibrates `target`
// and residual-adds `residual`: residual + alpha_s (x) target.
VarId sia_t(Tape& t, VarId score_src, VarId target, VarId residual,
            SteamUnit& unit, const SteamUnitVars& vars,
            bool training, Rng* rng);

VarId steam_forward_t(Tape& t, VarId x, SteamUnit& unit, const SteamUnitVars& vars,
                      bool training, Rng* rng);

// ---- spec-level single-sample wrappers (x is [C,H,W]; no gradients) ----

struct CiaOutput {
    Tensor x_ref;    // [C,H,W]
    Tensor alpha_c;  // [C]
};
CiaOutput cia(const Tensor& x, SteamUnit& unit);

Tensor sia(const Tensor& x_ref, const Tensor& x_orig, SteamUnit& unit,
           bool training, Rng* rng);

Tensor steam_forward(const Tensor& x, SteamUnit& unit, bool training, Rng* rng);

}  // namespace steam
