#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "steam/config.hpp"
#include "steam/flops.hpp"
#include "steam/train.hpp"
#include "steam/verify.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::string default_data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("STEAM_DATA_DIR")) return env;
    return "data";
}

steam::StageSpec spec_for_blocks(const std::vector<int>& blocks, const std::vector<int>& channels,
                                 const std::vector<int>& spatial) {
    if (!channels.empty()) {
        steam::StageSpec spec;
        spec.blocks_per_stage = blocks;
        spec.channels_per_stage = channels;
        if (!spatial.empty()) {
            for (int s : spatial) spec.spatial_per_stage.emplace_back(s, s);
        } else {
            int side = 56;
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                spec.spatial_per_stage.emplace_back(side, side);
                side = std::max(side / 2, 1);
            }
        }
        spec.validate();
        return spec;
    }
    for (const auto& builtin : {steam::resnet18_spec(), steam::resnet50_spec(),
                                steam::resnet101_spec(), steam::shufflenet_v2_spec()})
        if (builtin.blocks_per_stage == blocks) return builtin;
    throw steam::ConfigError("no built-in channel/spatial layout for this block vector; pass --channels");
}

int cmd_train(const std::string& config_path, const std::string& data_flag, int epochs,
              std::uint64_t seed, bool have_seed, const std::string& out_dir) {
    steam::RunConfig cfg = config_path.empty() ? steam::RunConfig::defaults()
                                               : steam::RunConfig::from_file(config_path);
    if (epochs > 0) {
        cfg.train.epochs = epochs;
        cfg.train.schedule = steam::Schedule::standard(cfg.train.sgd.lr, epochs);
    }
    if (have_seed) cfg.seed = seed;
    if (!out_dir.empty()) cfg.train.checkpoint_dir = out_dir;
    std::cout << "effective config:\n" << cfg.echo() << std::flush;

    auto [train_ds, test_ds] = steam::load_or_synth_mnist(default_data_dir(data_flag));
    const auto stats = steam::standardize(train_ds);
    steam::standardize_with(test_ds, stats);

    steam::Rng rng(cfg.seed);
    steam::DeskCnn model(cfg.model, rng);
    std::cout << "parameters: " << model.param_count() << " (steam: " << model.steam_param_count()
              << ")\n";
    const auto history = steam::train_epochs(model, train_ds, test_ds, cfg.train, rng);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream csv(out_dir + "/metrics.csv");
        csv << steam::metrics_csv(history);
        steam::save_checkpoint(out_dir + "/final.ckpt", model, cfg.train.epochs, rng);
        std::cout << "wrote " << out_dir << "/metrics.csv and " << out_dir << "/final.ckpt\n";
    }
    const auto eval = steam::evaluate(model, test_ds);
    std::cout << "final top-1 " << eval.top1 << " top-5 " << eval.top5 << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& data_flag) {
    steam::RunConfig cfg = config_path.empty() ? steam::RunConfig::defaults()
                                               : steam::RunConfig::from_file(config_path);
    auto [train_ds, test_ds] = steam::load_or_synth_mnist(default_data_dir(data_flag));
    const auto stats = steam::standardize(train_ds);
    steam::standardize_with(test_ds, stats);
    steam::Rng rng(cfg.seed);
    steam::DeskCnn model(cfg.model, rng);
    steam::load_checkpoint(checkpoint, model);
    const auto res = steam::evaluate(model, test_ds);
    std::cout << "top-1 " << res.top1 << "\ntop-5 " << res.top5 << "\nloss " << res.loss << "\n";
    return 0;
}

int cmd_plan(const std::string& blocks_str) {
    const auto blocks = parse_int_list(blocks_str);
    const auto plan = steam::plan_placement(blocks);
    std::cout << "units:";
    for (int u : plan.units_per_stage) std::cout << " " << u;
    std::cout << " (total " << plan.total_units() << ")\n" << plan.to_string();
    return 0;
}

int cmd_account(const std::string& blocks_str, const std::string& channels_str,
                const std::string& spatial_str, int d, int heads, double r, int k) {
    const auto blocks = parse_int_list(blocks_str);
    const auto spec = spec_for_blocks(blocks,
                                      channels_str.empty() ? std::vector<int>{} : parse_int_list(channels_str),
                                      spatial_str.empty() ? std::vector<int>{} : parse_int_list(spatial_str));
    steam::SteamConfig cfg;
    cfg.d = d;
    cfg.heads = heads;
    const auto rep = steam::account(spec, cfg, r > 0 ? std::optional<double>(r) : std::nullopt,
                                    k > 0 ? std::optional<int>(k) : std::nullopt);
    std::cout << steam::flops::conventions_text() << "\n" << rep.to_text();
    std::cout << "added params: " << rep.added_params << "\n";
    return 0;
}

int cmd_verify() {
    const bool ok = steam::verify::run_verification_suite(std::cout);
    std::cout << (ok ? "verification passed\n" : "verification FAILED\n");
    return ok ? 0 : 1;
}

int cmd_ablate(const std::string& axis, const std::string& data_flag, std::uint64_t seed,
               int epochs, std::int64_t train_size, std::int64_t val_size) {
    auto [train_full, test_full] = steam::load_or_synth_mnist(default_data_dir(data_flag));
    const auto stats = steam::standardize(train_full);
    steam::standardize_with(test_full, stats);
    steam::Rng split_rng(seed);
    const steam::Dataset train_ds = steam::subsample(train_full, train_size, split_rng);
    const steam::Dataset val_ds = steam::subsample(test_full, val_size, split_rng);

    struct Variant {
        std::string name;
        std::optional<steam::SteamConfig> steam;
    };
    std::vector<Variant> variants;
    auto base = steam::SteamConfig{};
    if (axis == "arrangement") {
        for (auto a : {steam::Arrangement::CaSa, steam::Arrangement::SaCa, steam::Arrangement::CaPlusSa}) {
            auto c = base;
            c.arrangement = a;
            variants.push_back({steam::to_string(a), c});
        }
    } else if (axis == "degree") {
        for (int hops : {1, 2}) {
            auto c = base;
            c.channel_hops = hops;
            variants.push_back({"degree-" + std::to_string(2 * hops), c});
        }
    } else if (axis == "heads") {
        for (int h : {1, 2, 4, 8}) {
            auto c = base;
            c.heads = h;
            variants.push_back({"heads-" + std::to_string(h), c});
        }
    } else if (axis == "pool") {
        for (auto p : {steam::Pooling::Avg, steam::Pooling::Max, steam::Pooling::AvgMaxConcat}) {
            auto c = base;
            c.channel_pool = p;
            c.spatial_pool = p;
            variants.push_back({steam::to_string(p), c});
        }
    } else if (axis == "edgedrop") {
        for (bool drop : {true, false}) {
            auto c = base;
            c.edge_drop = drop;
            variants.push_back({drop ? "edge-drop" : "no-edge-drop", c});
        }
    } else {
        throw steam::ConfigError("unknown ablation axis '" + axis + "'");
    }
    variants.push_back({"baseline", std::nullopt});

    std::cout << "variant,params,top1,top5\n";
    for (const auto& v : variants) {
        steam::RunConfig cfg = steam::RunConfig::defaults();
        cfg.seed = seed;
        cfg.model.steam = v.steam;
        cfg.train.epochs = epochs;
        cfg.train.schedule = steam::Schedule::standard(cfg.train.sgd.lr, epochs);
        cfg.train.log = false;
        steam::Rng rng(cfg.seed);
        steam::DeskCnn model(cfg.model, rng);
        steam::train_epochs(model, train_ds, val_ds, cfg.train, rng);
        const auto res = steam::evaluate(model, val_ds);
        std::cout << v.name << "," << model.param_count() << "," << res.top1 << "," << res.top5
                  << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STEAM attention library tool"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint, blocks, channels, spatial, axis;
    int epochs = 0, d = 8, heads = 4, k = 0, ablate_epochs = 3;
    double r = 0.0;
    std::uint64_t seed = 42;
    bool have_seed = false;
    std::int64_t train_size = 2000, val_size = 500;

    auto* train = app.add_subcommand("train", "train the desk CNN");
    train->add_option("--config", config_path, "JSON run config");
    train->add_option("--data", data_dir, "data directory (default $STEAM_DATA_DIR or ./data)");
    train->add_option("--epochs", epochs, "override epoch count");
    train->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) { have_seed = true; });
    train->add_option("--out", out_dir, "output directory for metrics and checkpoints");

    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
    evalc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    evalc->add_option("--config", config_path, "JSON run config matching the checkpoint");
    evalc->add_option("--data", data_dir, "data directory");

    auto* plan = app.add_subcommand("plan", "print the unit placement plan");
    plan->add_option("--blocks", blocks, "comma-separated blocks per stage")->required();

    auto* acct = app.add_subcommand("account", "parameter and FLOP accounting");
    acct->add_option("--blocks", blocks, "comma-separated blocks per stage")->required();
    acct->add_option("--channels", channels, "comma-separated channels per stage");
    acct->add_option("--spatial", spatial, "comma-separated square spatial sizes per stage");
    acct->add_option("--d", d, "attention dimension d");
    acct->add_option("--heads", heads, "attention heads");
    acct->add_option("--r", r, "SE/CBAM reduction ratio for the comparison table");
    acct->add_option("--k", k, "CBAM kernel size for the comparison table");

    app.add_subcommand("verify", "run the oracle/gradcheck/invariant suite");

    auto* abl = app.add_subcommand("ablate", "train configured variants and compare");
    abl->add_option("--axis", axis, "arrangement|degree|heads|pool|edgedrop")->required();
    abl->add_option("--data", data_dir, "data directory");
    abl->add_option("--seed", seed, "RNG seed");
    abl->add_option("--epochs", ablate_epochs, "epochs per variant");
    abl->add_option("--train-size", train_size, "training subset size");
    abl->add_option("--val-size", val_size, "validation subset size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("train"))
            return cmd_train(config_path, data_dir, epochs, seed, have_seed, out_dir);
        if (app.got_subcommand("eval")) return cmd_eval(checkpoint, config_path, data_dir);
        if (app.got_subcommand("plan")) return cmd_plan(blocks);
        if (app.got_subcommand("account")) return cmd_account(blocks, channels, spatial, d, heads, r, k);
        if (app.got_subcommand("verify")) return cmd_verify();
        if (app.got_subcommand("ablate"))
            return cmd_ablate(axis, data_dir, seed, ablate_epochs, train_size, val_size);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
