#pragma once

#include <string>
#include <vector>

#include "steam/data.hpp"
#include "steam/model.hpp"

namespace steam {

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// SGD with momentum; weight decay folded into the gradient
// (v <- mu*v + g + wd*p; p <- p - lr*v).
struct SgdConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

void sgd_step(std::vector<NamedParam>& params,
              const std::vector<const std::vector<double>*>& grads,
              const SgdConfig& cfg);

// Step decay by `factor` at each milestone epoch (0-based epoch index).
struct Schedule {
    double initial_lr = 0.1;
    double decay_factor = 10.0;
    std::vector<int> milestones;

    double lr_at(int epoch) const;
    // milestones at 30% / 60% / 90% of the budget
    static Schedule standard(double initial_lr, int epochs);
};

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainOptions {
    int epochs = 10;
    std::int64_t batch_size = 32;
    SgdConfig sgd;
    Schedule schedule;
    int start_epoch = 0;  // for resume
    bool log = true;
    std::string checkpoint_dir;  // per-epoch checkpoints when non-empty
};

std::vector<EpochMetrics> train_epochs(DeskCnn& model, const Dataset& train,
                                       const Dataset& val, const TrainOptions& opts,
                                       Rng& rng);

struct EvalResult {
    double top1 = 0.0;
    double top5 = 0.0;
    double loss = 0.0;
};
EvalResult evaluate(DeskCnn& model, const Dataset& ds, std::int64_t batch_size = 64);

std::string metrics_csv(const std::vector<EpochMetrics>& history);

// ---- checkpointing ----
// Binary container: magic "STEAMCKPT", u32 version, u64 config digest,
// u32 epoch, 4 x u64 RNG state, then length-prefixed name/shape/data
// records (little-endian f64) for parameters and momentum buffers.
void save_checkpoint(const std::string& path, const DeskCnn& model, int epoch, const Rng& rng);

struct CheckpointInfo {
    int epoch = 0;
    std::array<std::uint64_t, 4> rng_state{};
};
CheckpointInfo load_checkpoint(const std::string& path, DeskCnn& model);

}  // namespace steam
