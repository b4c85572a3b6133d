#include "steam/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

namespace steam {

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw FormatError(path + ": truncated at byte offset " + std::to_string(in.tellg() == -1 ? -1 : static_cast<long long>(in.tellg())));
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot open " + images_path);
    const std::uint32_t magic = read_be_u32(img, images_path);
    if (magic != kImagesMagic)
        throw FormatError(images_path + ": bad image magic " + std::to_string(magic) +
                          " at byte offset 0");
    const std::uint32_t n = read_be_u32(img, images_path);
    const std::uint32_t h = read_be_u32(img, images_path);
    const std::uint32_t w = read_be_u32(img, images_path);
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * h * w);
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(img.gcount()) != raw.size())
        throw FormatError(images_path + ": truncated image payload at byte offset " +
                          std::to_string(16 + img.gcount()));

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot open " + labels_path);
    const std::uint32_t lmagic = read_be_u32(lab, labels_path);
    if (lmagic != kLabelsMagic)
        throw FormatError(labels_path + ": bad label magic " + std::to_string(lmagic) +
                          " at byte offset 0");
    const std::uint32_t ln = read_be_u32(lab, labels_path);
    if (ln != n)
        throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                          " does not match image count " + std::to_string(n));
    std::vector<unsigned char> lraw(ln);
    lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
    if (static_cast<std::size_t>(lab.gcount()) != lraw.size())
        throw FormatError(labels_path + ": truncated label payload at byte offset " +
                          std::to_string(8 + lab.gcount()));

    Dataset ds;
    ds.images = Tensor::zeros({static_cast<std::int64_t>(n), 1, static_cast<std::int64_t>(h),
                               static_cast<std::int64_t>(w)});
    for (std::size_t i = 0; i < raw.size(); ++i) ds.images[static_cast<std::int64_t>(i)] = raw[i] / 255.0;
    ds.labels.assign(lraw.begin(), lraw.end());
    ds.class_count = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    if (ds.images.ndim() != 4 || ds.images.dim(1) != 1)
        throw FormatError("write_idx expects [N,1,H,W] images, got " + shape_str(ds.images.shape));
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot open " + images_path + " for writing");
    write_be_u32(img, kImagesMagic);
    write_be_u32(img, static_cast<std::uint32_t>(ds.images.dim(0)));
    write_be_u32(img, static_cast<std::uint32_t>(ds.images.dim(2)));
    write_be_u32(img, static_cast<std::uint32_t>(ds.images.dim(3)));
    for (std::int64_t i = 0; i < ds.images.numel(); ++i) {
        const double v = std::clamp(ds.images[i], 0.0, 1.0);
        const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot open " + labels_path + " for writing");
    write_be_u32(lab, kLabelsMagic);
    write_be_u32(lab, static_cast<std::uint32_t>(ds.labels.size()));
    for (int l : ds.labels) {
        const auto byte = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

Dataset load_cifar_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::int64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    constexpr std::int64_t kRecord = 3073;
    if (bytes % kRecord != 0)
        throw FormatError(path + ": size " + std::to_string(bytes) +
                          " is not a multiple of the 3073-byte record");
    const std::int64_t n = bytes / kRecord;
    Dataset ds;
    ds.images = Tensor::zeros({n, 3, 32, 32});
    ds.labels.resize(static_cast<std::size_t>(n));
    std::vector<unsigned char> rec(kRecord);
    for (std::int64_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(rec.data()), kRecord);
        if (!in)
            throw FormatError(path + ": truncated record at byte offset " +
                              std::to_string(i * kRecord));
        if (rec[0] > 9)
            throw FormatError(path + ": label " + std::to_string(rec[0]) +
                              " out of range at byte offset " + std::to_string(i * kRecord));
        ds.labels[static_cast<std::size_t>(i)] = rec[0];
        for (std::int64_t p = 0; p < 3072; ++p)
            ds.images[i * 3072 + p] = rec[static_cast<std::size_t>(1 + p)] / 255.0;
    }
    ds.class_count = 10;
    return ds;
}

NormalizationStats standardize(Dataset& ds) {
    const std::int64_t c = ds.channels();
    const std::int64_t per = ds.images.numel() / std::max<std::int64_t>(c, 1);
    NormalizationStats stats;
    stats.mean.assign(static_cast<std::size_t>(c), 0.0);
    stats.stddev.assign(static_cast<std::size_t>(c), 1.0);
    const std::int64_t n = ds.images.dim(0), hw = ds.images.dim(2) * ds.images.dim(3);
    for (std::int64_t ci = 0; ci < c; ++ci) {
        double sum = 0.0, sq = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t p = 0; p < hw; ++p) {
                const double v = ds.images[(i * c + ci) * hw + p];
                sum += v;
                sq += v * v;
            }
        const double mean = sum / static_cast<double>(per);
        const double var = std::max(sq / static_cast<double>(per) - mean * mean, 1e-12);
        stats.mean[static_cast<std::size_t>(ci)] = mean;
        stats.stddev[static_cast<std::size_t>(ci)] = std::sqrt(var);
    }
    standardize_with(ds, stats);
    return stats;
}

void standardize_with(Dataset& ds, const NormalizationStats& stats) {
    const std::int64_t c = ds.channels();
    if (static_cast<std::int64_t>(stats.mean.size()) != c)
        throw DimensionError("normalization stats cover " + std::to_string(stats.mean.size()) +
                             " channels, dataset has " + std::to_string(c));
    const std::int64_t n = ds.images.dim(0), hw = ds.images.dim(2) * ds.images.dim(3);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ci = 0; ci < c; ++ci)
            for (std::int64_t p = 0; p < hw; ++p) {
                auto& v = ds.images[(i * c + ci) * hw + p];
                v = (v - stats.mean[static_cast<std::size_t>(ci)]) /
                    stats.stddev[static_cast<std::size_t>(ci)];
            }
    ds.stats = stats;
}

Dataset subsample(const Dataset& ds, std::int64_t n, Rng& rng) {
    if (n > ds.size())
        throw ParameterError("subsample size " + std::to_string(n) + " exceeds dataset size " +
                             std::to_string(ds.size()));
    const int k = std::max(ds.class_count, 1);
    std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
    for (auto& bucket : by_class)
        for (std::size_t i = bucket.size(); i > 1; --i)
            std::swap(bucket[i - 1], bucket[rng.uniform_int(static_cast<std::int64_t>(i))]);

    std::vector<std::int64_t> take(static_cast<std::size_t>(k), n / k);
    for (std::int64_t r = 0; r < n % k; ++r) ++take[static_cast<std::size_t>(r)];
    std::vector<std::int64_t> picked;
    for (int ci = 0; ci < k; ++ci) {
        const auto& bucket = by_class[static_cast<std::size_t>(ci)];
        const auto cnt = std::min<std::int64_t>(take[static_cast<std::size_t>(ci)],
                                                static_cast<std::int64_t>(bucket.size()));
        picked.insert(picked.end(), bucket.begin(), bucket.begin() + cnt);
    }
    // top up from the remaining pool if some class ran short
    if (static_cast<std::int64_t>(picked.size()) < n) {
        std::vector<bool> used(static_cast<std::size_t>(ds.size()), false);
        for (auto i : picked) used[static_cast<std::size_t>(i)] = true;
        for (std::int64_t i = 0; i < ds.size() && static_cast<std::int64_t>(picked.size()) < n; ++i)
            if (!used[static_cast<std::size_t>(i)]) picked.push_back(i);
    }
    std::sort(picked.begin(), picked.end());

    const std::int64_t c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const std::int64_t chw = c * h * w;
    Dataset out;
    out.images = Tensor::zeros({n, c, h, w});
    out.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t src = picked[static_cast<std::size_t>(i)];
        std::copy_n(ds.images.data.begin() + src * chw, chw, out.images.data.begin() + i * chw);
        out.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
    }
    out.class_count = ds.class_count;
    out.stats = ds.stats;
    return out;
}

BatchIterator::BatchIterator(const Dataset& ds, std::int64_t batch_size, bool shuffle, Rng& rng)
    : ds_(ds), batch_size_(batch_size) {
    if (batch_size < 1) throw ParameterError("batch size must be >= 1");
    order_.resize(static_cast<std::size_t>(ds.size()));
    std::iota(order_.begin(), order_.end(), 0);
    if (shuffle)
        for (std::size_t i = order_.size(); i > 1; --i)
            std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i)))]);
}

std::int64_t BatchIterator::batch_count() const {
    return (static_cast<std::int64_t>(order_.size()) + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Batch& out) {
    const auto total = static_cast<std::int64_t>(order_.size());
    if (cursor_ >= total) return false;
    const std::int64_t b = std::min(batch_size_, total - cursor_);
    const std::int64_t c = ds_.images.dim(1), h = ds_.images.dim(2), w = ds_.images.dim(3);
    const std::int64_t chw = c * h * w;
    out.images = Tensor::zeros({b, c, h, w});
    out.labels.resize(static_cast<std::size_t>(b));
    for (std::int64_t i = 0; i < b; ++i) {
        const std::int64_t src = order_[static_cast<std::size_t>(cursor_ + i)];
        std::copy_n(ds_.images.data.begin() + src * chw, chw, out.images.data.begin() + i * chw);
        out.labels[static_cast<std::size_t>(i)] = ds_.labels[static_cast<std::size_t>(src)];
    }
    cursor_ += b;
    return true;
}

namespace {

// seven-segment digit geometry on a 28x28 canvas
constexpr unsigned char kSegmentsByDigit[10] = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};

void draw_hline(std::vector<double>& img, int y, int x0, int x1, double v) {
    for (int t = -1; t <= 1; ++t)
        for (int x = x0; x <= x1; ++x) {
            const int yy = y + t;
            if (yy >= 0 && yy < 28 && x >= 0 && x < 28) img[static_cast<std::size_t>(yy * 28 + x)] = v;
        }
}
void draw_vline(std::vector<double>& img, int x, int y0, int y1, double v) {
    for (int t = -1; t <= 1; ++t)
        for (int y = y0; y <= y1; ++y) {
            const int xx = x + t;
            if (xx >= 0 && xx < 28 && y >= 0 && y < 28) img[static_cast<std::size_t>(y * 28 + xx)] = v;
        }
}

}  // namespace

Dataset synth_digits(std::int64_t n, Rng& rng) {
    Dataset ds;
    ds.images = Tensor::zeros({n, 1, 28, 28});
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.class_count = 10;
    std::vector<double> canvas(28 * 28);
    for (std::int64_t i = 0; i < n; ++i) {
        const int digit = static_cast<int>(rng.uniform_int(10));
        ds.labels[static_cast<std::size_t>(i)] = digit;
        std::fill(canvas.begin(), canvas.end(), 0.0);

        // jittered bounding box and stroke intensity per sample
        const int ox = 6 + static_cast<int>(rng.uniform_int(5)) - 2;   // 4..8
        const int oy = 5 + static_cast<int>(rng.uniform_int(5)) - 2;   // 3..7
        const int dw = 12 + static_cast<int>(rng.uniform_int(5)) - 2;  // 10..14
        const int dh = 16 + static_cast<int>(rng.uniform_int(5)) - 2;  // 14..18
        const double ink = 0.75 + 0.25 * rng.uniform();

        const unsigned char seg = kSegmentsByDigit[digit];
        const int midy = oy + dh / 2;
        if (seg & 0b0000001) draw_hline(canvas, oy, ox, ox + dw, ink);            // top
        if (seg & 0b0000010) draw_vline(canvas, ox + dw, oy, midy, ink);          // top right
        if (seg & 0b0000100) draw_vline(canvas, ox + dw, midy, oy + dh, ink);     // bottom right
        if (seg & 0b0001000) draw_hline(canvas, oy + dh, ox, ox + dw, ink);       // bottom
        if (seg & 0b0010000) draw_vline(canvas, ox, midy, oy + dh, ink);          // bottom left
        if (seg & 0b0100000) draw_vline(canvas, ox, oy, midy, ink);               // top left
        if (seg & 0b1000000) draw_hline(canvas, midy, ox, ox + dw, ink);          // middle

        for (std::size_t p = 0; p < canvas.size(); ++p) {
            double v = canvas[p] + 0.08 * rng.normal();
            ds.images[i * 28 * 28 + static_cast<std::int64_t>(p)] = std::clamp(v, 0.0, 1.0);
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> load_or_synth_mnist(const std::string& dir,
                                                std::int64_t synth_train, std::int64_t synth_test) {
    namespace fs = std::filesystem;
    const fs::path base(dir);
    const auto train_img = base / "train-images-idx3-ubyte";
    const auto train_lab = base / "train-labels-idx1-ubyte";
    const auto test_img = base / "t10k-images-idx3-ubyte";
    const auto test_lab = base / "t10k-labels-idx1-ubyte";
    if (!(fs::exists(train_img) && fs::exists(train_lab) && fs::exists(test_img) &&
          fs::exists(test_lab))) {
        fs::create_directories(base);
        Rng rng(0x5d1975u);
        write_idx(synth_digits(synth_train, rng), train_img.string(), train_lab.string());
        write_idx(synth_digits(synth_test, rng), test_img.string(), test_lab.string());
    }
    return {load_idx(train_img.string(), train_lab.string()),
            load_idx(test_img.string(), test_lab.string())};
}

}  // namespace steam
