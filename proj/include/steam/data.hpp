#pragma once

#include <string>
#include <vector>

#include "steam/rng.hpp"
#include "steam/tensor.hpp"

namespace steam {

struct NormalizationStats {
    std::vector<double> mean;  // per channel
    std::vector<double> stddev;
};

struct Dataset {
    Tensor images;  // [N, C, H, W]
    std::vector<int> labels;
    int class_count = 0;
    NormalizationStats stats;  // set once standardized

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    std::int64_t channels() const { return images.ndim() == 4 ? images.dim(1) : 0; }
};

// IDX, bit-exact: big-endian u32 magic (0x00000803 images / 0x00000801
// labels), big-endian dimension sizes, unsigned-byte pixels. Pixels are
// scaled to [0,1]; call standardize() afterwards for training splits.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// CIFAR binary: 3073-byte records (label byte, then 1024 bytes per channel
// in R,G,B order), 3x32x32 images.
Dataset load_cifar_binary(const std::string& path);

// Computes per-channel mean/std from ds and applies (x - mean) / std.
NormalizationStats standardize(Dataset& ds);
// Applies previously computed training-split statistics (eval splits).
void standardize_with(Dataset& ds, const NormalizationStats& stats);

// Deterministic stratified subsample: equal per-class counts where n is
// divisible by class_count, remainder spread over the lowest class indices.
Dataset subsample(const Dataset& ds, std::int64_t n, Rng& rng);

struct Batch {
    Tensor images;  // [B, C, H, W]
    std::vector<int> labels;
};

class BatchIterator {
public:
    BatchIterator(const Dataset& ds, std::int64_t batch_size, bool shuffle, Rng& rng);
    bool next(Batch& out);  // false once exhausted; final partial batch is emitted
    std::int64_t batch_count() const;

private:
    const Dataset& ds_;
    std::int64_t batch_size_;
    std::vector<std::int64_t> order_;
    std::int64_t cursor_ = 0;
};

// Procedurally rendered 10-class digit images in MNIST geometry
// (1x28x28, byte pixels), for environments without the real dataset.
// Deterministic per seed.
Dataset synth_digits(std::int64_t n, Rng& rng);

// Resolves a data directory to (train, test) datasets: real MNIST IDX
// files when present, otherwise synthesizes and caches IDX files there.
std::pair<Dataset, Dataset> load_or_synth_mnist(const std::string& dir,
                                                std::int64_t synth_train = 12000,
                                                std::int64_t synth_test = 2000);

}  // namespace steam
