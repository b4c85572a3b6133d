#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "steam/steam.hpp"

namespace steam {

// Backbone stage description: block counts, output channels and spatial
// sizes per stage.
struct StageSpec {
    std::vector<int> blocks_per_stage;
    std::vector<int> channels_per_stage;
    std::vector<std::pair<int, int>> spatial_per_stage;

    std::size_t stage_count() const { return blocks_per_stage.size(); }
    void validate() const;
};

// ceil(N_bs / 4) units per stage; one at the stage end, the rest evenly
// distributed at blocks ceil(j*N_bs/u).
struct PlacementPlan {
    std::vector<int> units_per_stage;
    std::vector<std::vector<int>> insertion_indices;  // 1-based block indices

    int total_units() const;
    std::string to_string() const;
};

PlacementPlan plan_placement(const StageSpec& spec);
PlacementPlan plan_placement(const std::vector<int>& blocks_per_stage);

std::int64_t count_params(const PlacementPlan& plan, int d);

// Analytic FLOP count for all STEAM units of a plan (eval mode), under the
// conventions in flops.hpp. Matches runtime instrumentation exactly.
double count_flops(const PlacementPlan& plan, const StageSpec& spec, const SteamConfig& cfg);

// FLOPs of a single unit applied to a [C,H,W] map.
std::uint64_t unit_flops(int c, int h, int w, const SteamConfig& cfg);

// Executes each planned unit on a random input with the FLOP counter armed
// and returns the measured total.
std::uint64_t measure_flops(const PlacementPlan& plan, const StageSpec& spec,
                            const SteamConfig& cfg, Rng& rng);

struct AccountingRow {
    std::string module;
    std::string formula;
    std::int64_t params = 0;
};

struct AccountingReport {
    std::int64_t added_params = 0;
    double added_flops = 0.0;  // FLOPs
    std::vector<int> units_per_stage;
    std::vector<std::int64_t> params_per_stage;
    std::vector<double> flops_per_stage;
    std::vector<AccountingRow> comparison;  // closed forms from prior modules

    std::string to_text() const;
    std::string to_csv() const;
};

AccountingReport account(const StageSpec& spec, const SteamConfig& cfg,
                         std::optional<double> se_reduction = {},
                         std::optional<int> cbam_kernel = {});

// Closed-form parameter counts of prior attention modules for the
// comparison table. SE and CBAM need the reduction ratio r; CBAM also
// needs its 2-D kernel size k.
std::vector<AccountingRow> reference_param_table(const StageSpec& spec, int d,
                                                 std::optional<double> r,
                                                 std::optional<int> k);

// ---- desk-scale trainable CNN ----

struct NamedParam {
    std::string name;
    Tensor value;
    Tensor velocity;  // SGD momentum buffer
};

struct ModelConfig {
    StageSpec spec;
    int in_channels = 1;
    std::pair<int, int> input_size = {28, 28};
    int num_classes = 10;
    std::optional<SteamConfig> steam;  // nullopt -> plain baseline
};

// Residual CNN: stem conv, stages of two-conv basic blocks with stride-2
// downsampling between stages, optional STEAM units wrapping block outputs
// at the plan positions, global pool and a linear classifier.
class DeskCnn {
public:
    DeskCnn(ModelConfig cfg, Rng& rng);

    // x: [B, Cin, H, W] -> logits [B, num_classes]. Leaf ids of every
    // trainable parameter are appended to `param_vars` aligned with
    // params(); read gradients from the tape after backward().
    VarId forward(Tape& t, const Tensor& x, bool training, Rng* rng,
                  std::vector<VarId>* param_vars = nullptr);

    std::vector<NamedParam>& params() { return params_; }
    const std::vector<NamedParam>& params() const { return params_; }
    std::int64_t param_count() const;
    std::int64_t steam_param_count() const;

    const ModelConfig& config() const { return cfg_; }
    const PlacementPlan& plan() const { return plan_; }
    std::uint64_t config_digest() const;

private:
    struct BlockLayout {
        int stage = 0, block = 0;
        int c_in = 0, c_out = 0, stride = 1;
        bool projection_skip = false;
        int steam_unit = -1;  // index into units_, -1 = none
    };

    int add_param(const std::string& name, Shape shape, double stddev, Rng& rng);

    ModelConfig cfg_;
    PlacementPlan plan_;
    std::vector<NamedParam> params_;
    std::vector<SteamUnit> units_;
    std::vector<BlockLayout> blocks_;
    // parameter indices: stem, per-block convs, fc
    int stem_w_ = -1, stem_b_ = -1, fc_w_ = -1, fc_b_ = -1;
    std::vector<std::array<int, 6>> block_params_;  // w1,b1,w2,b2,ws,bs
    // per unit: cia wk,bk,wq,bq then sia wk,bk,wq,bq (indices into params_)
    std::vector<std::array<int, 8>> unit_params_;
};

// Built-in stage specs used by the accounting reports.
StageSpec resnet18_spec();
StageSpec resnet50_spec();
StageSpec resnet101_spec();
StageSpec shufflenet_v2_spec();

}  // namespace steam
