#include "steam/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "steam/tape.hpp"

namespace steam {

void sgd_step(std::vector<NamedParam>& params,
              const std::vector<const std::vector<double>*>& grads, const SgdConfig& cfg) {
    if (grads.size() != params.size())
        throw TrainError("gradient count " + std::to_string(grads.size()) +
                         " does not match parameter count " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& g = *grads[i];
        if (g.size() != p.value.data.size())
            throw TrainError("gradient size mismatch for " + p.name);
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double step = g[j] + cfg.weight_decay * p.value.data[j];
            p.velocity.data[j] = cfg.momentum * p.velocity.data[j] + step;
            p.value.data[j] -= cfg.lr * p.velocity.data[j];
        }
    }
}

double Schedule::lr_at(int epoch) const {
    double lr = initial_lr;
    for (int ms : milestones)
        if (epoch >= ms) lr /= decay_factor;
    return lr;
}

Schedule Schedule::standard(double initial_lr, int epochs) {
    Schedule s;
    s.initial_lr = initial_lr;
    for (double frac : {0.3, 0.6, 0.9}) {
        const int ms = static_cast<int>(std::lround(frac * epochs));
        if (ms > 0 && ms < epochs) s.milestones.push_back(ms);
    }
    return s;
}

namespace {
int argmax_row(const Tensor& logits, std::int64_t row) {
    const std::int64_t k = logits.dim(1);
    int best = 0;
    for (std::int64_t j = 1; j < k; ++j)
        if (logits[row * k + j] > logits[row * k + best]) best = static_cast<int>(j);
    return best;
}
}  // namespace

std::vector<EpochMetrics> train_epochs(DeskCnn& model, const Dataset& train, const Dataset& val,
                                       const TrainOptions& opts, Rng& rng) {
    std::vector<EpochMetrics> history;
    for (int epoch = opts.start_epoch; epoch < opts.epochs; ++epoch) {
        SgdConfig sgd = opts.sgd;
        sgd.lr = opts.schedule.lr_at(epoch);

        double loss_sum = 0.0;
        std::int64_t seen = 0, correct = 0, batches = 0;
        BatchIterator it(train, opts.batch_size, true, rng);
        Batch batch;
        while (it.next(batch)) {
            Tape t;
            std::vector<VarId> pv;
            const VarId logits = model.forward(t, batch.images, true, &rng, &pv);
            const VarId loss = t.cross_entropy(logits, batch.labels);
            const double loss_val = t.value(loss)[0];
            if (!std::isfinite(loss_val))
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batches));
            t.backward(loss);

            std::vector<const std::vector<double>*> grads(pv.size());
            for (std::size_t i = 0; i < pv.size(); ++i) grads[i] = &t.grad(pv[i]);
            sgd_step(model.params(), grads, sgd);

            const auto b = static_cast<std::int64_t>(batch.labels.size());
            loss_sum += loss_val * static_cast<double>(b);
            for (std::int64_t i = 0; i < b; ++i)
                if (argmax_row(t.value(logits), i) == batch.labels[static_cast<std::size_t>(i)])
                    ++correct;
            seen += b;
            ++batches;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = sgd.lr;
        m.train_loss = loss_sum / static_cast<double>(std::max<std::int64_t>(seen, 1));
        m.train_acc = static_cast<double>(correct) / static_cast<double>(std::max<std::int64_t>(seen, 1));
        if (val.size() > 0) m.val_acc = evaluate(model, val).top1;
        history.push_back(m);

        if (opts.log)
            std::printf("epoch %d lr %.5f loss %.4f train_acc %.4f val_acc %.4f\n", epoch, m.lr,
                        m.train_loss, m.train_acc, m.val_acc);
        if (!opts.checkpoint_dir.empty()) {
            std::filesystem::create_directories(opts.checkpoint_dir);
            save_checkpoint(opts.checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".ckpt",
                            model, epoch + 1, rng);
        }
    }
    return history;
}

EvalResult evaluate(DeskCnn& model, const Dataset& ds, std::int64_t batch_size) {
    EvalResult res;
    std::int64_t seen = 0, top1 = 0, top5 = 0;
    double loss_sum = 0.0;
    Rng dummy(0);
    BatchIterator it(ds, batch_size, false, dummy);
    Batch batch;
    while (it.next(batch)) {
        Tape t;
        const VarId logits = model.forward(t, batch.images, false, nullptr, nullptr);
        const VarId loss = t.cross_entropy(logits, batch.labels);
        const Tensor& lg = t.value(logits);
        const auto b = static_cast<std::int64_t>(batch.labels.size());
        const std::int64_t k = lg.dim(1);
        for (std::int64_t i = 0; i < b; ++i) {
            const int label = batch.labels[static_cast<std::size_t>(i)];
            const double ref = lg[i * k + label];
            std::int64_t above = 0;
            for (std::int64_t j = 0; j < k; ++j)
                if (lg[i * k + j] > ref) ++above;
            if (above == 0) ++top1;
            if (above < 5) ++top5;
        }
        loss_sum += t.value(loss)[0] * static_cast<double>(b);
        seen += b;
    }
    if (seen > 0) {
        res.top1 = static_cast<double>(top1) / static_cast<double>(seen);
        res.top5 = static_cast<double>(top5) / static_cast<double>(seen);
        res.loss = loss_sum / static_cast<double>(seen);
    }
    return res;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
    std::ostringstream os;
    os << "epoch,lr,train_loss,train_acc,val_acc\n";
    os.precision(17);
    for (const auto& m : history)
        os << m.epoch << "," << m.lr << "," << m.train_loss << "," << m.train_acc << ","
           << m.val_acc << "\n";
    return os.str();
}

// ---- checkpointing ----

namespace {

constexpr char kMagic[] = "STEAMCKPT";  // 9 bytes on disk, NUL excluded
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}
void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}
std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError(path + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}
std::uint64_t read_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw FormatError(path + ": truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}
void write_f64_block(std::ostream& out, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(d));
        std::memcpy(&bits, &d, 8);
        write_u64(out, bits);
    }
}
void read_f64_block(std::istream& in, std::vector<double>& v, const std::string& path) {
    for (auto& d : v) {
        const std::uint64_t bits = read_u64(in, path);
        std::memcpy(&d, &bits, 8);
    }
}
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_string(std::istream& in, const std::string& path) {
    const std::uint32_t n = read_u32(in, path);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw FormatError(path + ": truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const DeskCnn& model, int epoch, const Rng& rng) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out.write(kMagic, 9);
    write_u32(out, kVersion);
    write_u64(out, model.config_digest());
    write_u32(out, static_cast<std::uint32_t>(epoch));
    for (std::uint64_t s : rng.state()) write_u64(out, s);
    write_u32(out, static_cast<std::uint32_t>(model.params().size()));
    for (const auto& p : model.params()) {
        write_string(out, p.name);
        write_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
        for (auto d : p.value.shape) write_u64(out, static_cast<std::uint64_t>(d));
        write_f64_block(out, p.value.data);
        write_f64_block(out, p.velocity.data);
    }
    if (!out) throw FormatError("failed writing " + path);
}

CheckpointInfo load_checkpoint(const std::string& path, DeskCnn& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    char magic[9];
    in.read(magic, 9);
    if (!in || std::memcmp(magic, kMagic, 9) != 0)
        throw FormatError(path + ": not a checkpoint file");
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t digest = read_u64(in, path);
    if (digest != model.config_digest())
        throw FormatError(path + ": checkpoint was written for a different model configuration");
    CheckpointInfo info;
    info.epoch = static_cast<int>(read_u32(in, path));
    for (auto& s : info.rng_state) s = read_u64(in, path);
    const std::uint32_t count = read_u32(in, path);
    if (count != model.params().size())
        throw FormatError(path + ": checkpoint has " + std::to_string(count) +
                          " parameters, model has " + std::to_string(model.params().size()));
    for (auto& p : model.params()) {
        const std::string name = read_string(in, path);
        if (name != p.name)
            throw FormatError(path + ": parameter order mismatch, expected " + p.name + " got " + name);
        const std::uint32_t ndim = read_u32(in, path);
        Shape shape(ndim);
        for (auto& d : shape) d = static_cast<std::int64_t>(read_u64(in, path));
        if (shape != p.value.shape)
            throw FormatError(path + ": shape mismatch for " + p.name);
        read_f64_block(in, p.value.data, path);
        read_f64_block(in, p.velocity.data, path);
    }
    return info;
}

}  // namespace steam
