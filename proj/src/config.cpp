#include "steam/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace steam {

namespace {
using nlohmann::json;

SteamConfig steam_from_json(const json& j) {
    SteamConfig cfg;
    if (j.contains("d")) cfg.d = j["d"].get<int>();
    if (j.contains("heads")) cfg.heads = j["heads"].get<int>();
    if (j.contains("arrangement")) cfg.arrangement = arrangement_from_string(j["arrangement"].get<std::string>());
    if (j.contains("m")) cfg.m = j["m"].get<int>();
    if (j.contains("channel_hops")) cfg.channel_hops = j["channel_hops"].get<int>();
    if (j.contains("edge_drop")) cfg.edge_drop = j["edge_drop"].get<bool>();
    if (j.contains("inter_activation"))
        cfg.inter_activation = activation_from_string(j["inter_activation"].get<std::string>());
    if (j.contains("channel_pool")) cfg.channel_pool = pooling_from_string(j["channel_pool"].get<std::string>());
    if (j.contains("spatial_pool")) cfg.spatial_pool = pooling_from_string(j["spatial_pool"].get<std::string>());
    if (j.contains("sqrt_scaling")) cfg.sqrt_scaling = j["sqrt_scaling"].get<bool>();
    if (j.contains("include_self_loops")) cfg.include_self_loops = j["include_self_loops"].get<bool>();
    cfg.validate();
    return cfg;
}
}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.model.spec = StageSpec{{1, 1}, {8, 16}, {{28, 28}, {14, 14}}};
    cfg.model.in_channels = 1;
    cfg.model.input_size = {28, 28};
    cfg.model.num_classes = 10;
    cfg.model.steam = SteamConfig{};
    cfg.train.epochs = 10;
    cfg.train.batch_size = 32;
    cfg.train.sgd = SgdConfig{0.01, 0.9, 1e-4};
    cfg.train.schedule = Schedule::standard(0.01, cfg.train.epochs);
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }

    RunConfig cfg = defaults();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("model")) {
        const auto& m = j["model"];
        if (m.contains("blocks")) cfg.model.spec.blocks_per_stage = m["blocks"].get<std::vector<int>>();
        if (m.contains("channels")) cfg.model.spec.channels_per_stage = m["channels"].get<std::vector<int>>();
        if (m.contains("spatial")) {
            cfg.model.spec.spatial_per_stage.clear();
            for (const auto& hw : m["spatial"]) {
                if (!hw.is_array() || hw.size() != 2)
                    throw ConfigError(path + ": model.spatial entries must be [H, W] pairs");
                cfg.model.spec.spatial_per_stage.emplace_back(hw[0].get<int>(), hw[1].get<int>());
            }
        }
        if (m.contains("in_channels")) cfg.model.in_channels = m["in_channels"].get<int>();
        if (m.contains("input_size")) {
            const auto& hw = m["input_size"];
            if (!hw.is_array() || hw.size() != 2)
                throw ConfigError(path + ": model.input_size must be [H, W]");
            cfg.model.input_size = {hw[0].get<int>(), hw[1].get<int>()};
        }
        if (m.contains("num_classes")) cfg.model.num_classes = m["num_classes"].get<int>();
        if (m.contains("steam")) {
            if (m["steam"].is_null())
                cfg.model.steam.reset();
            else
                cfg.model.steam = steam_from_json(m["steam"]);
        }
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        if (t.contains("epochs")) cfg.train.epochs = t["epochs"].get<int>();
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::int64_t>();
        if (t.contains("lr")) cfg.train.sgd.lr = t["lr"].get<double>();
        if (t.contains("momentum")) cfg.train.sgd.momentum = t["momentum"].get<double>();
        if (t.contains("weight_decay")) cfg.train.sgd.weight_decay = t["weight_decay"].get<double>();
        cfg.train.schedule = Schedule::standard(cfg.train.sgd.lr, cfg.train.epochs);
        if (t.contains("milestones")) cfg.train.schedule.milestones = t["milestones"].get<std::vector<int>>();
        if (t.contains("decay_factor")) cfg.train.schedule.decay_factor = t["decay_factor"].get<double>();
        if (t.contains("checkpoint_dir")) cfg.train.checkpoint_dir = t["checkpoint_dir"].get<std::string>();
    }
    cfg.model.spec.validate();
    return cfg;
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    os << "seed: " << seed << "\n";
    os << "model:\n  blocks:";
    for (int b : model.spec.blocks_per_stage) os << " " << b;
    os << "\n  channels:";
    for (int c : model.spec.channels_per_stage) os << " " << c;
    os << "\n  spatial:";
    for (auto [h, w] : model.spec.spatial_per_stage) os << " " << h << "x" << w;
    os << "\n  in_channels: " << model.in_channels << "\n  num_classes: " << model.num_classes << "\n";
    if (model.steam) {
        const auto& s = *model.steam;
        os << "  steam: d=" << s.d << " heads=" << s.heads << " arrangement=" << to_string(s.arrangement)
           << " m=" << s.m << " channel_hops=" << s.channel_hops
           << " edge_drop=" << (s.edge_drop ? "true" : "false")
           << " inter_activation=" << to_string(s.inter_activation)
           << " channel_pool=" << to_string(s.channel_pool)
           << " spatial_pool=" << to_string(s.spatial_pool)
           << " sqrt_scaling=" << (s.sqrt_scaling ? "true" : "false")
           << " self_loops=" << (s.include_self_loops ? "true" : "false") << "\n";
    } else {
        os << "  steam: none (baseline)\n";
    }
    os << "train:\n  epochs: " << train.epochs << "\n  batch_size: " << train.batch_size
       << "\n  lr: " << train.sgd.lr << "\n  momentum: " << train.sgd.momentum
       << "\n  weight_decay: " << train.sgd.weight_decay << "\n  milestones:";
    for (int m : train.schedule.milestones) os << " " << m;
    os << "\n  decay_factor: " << train.schedule.decay_factor << "\n";
    if (!train.checkpoint_dir.empty()) os << "  checkpoint_dir: " << train.checkpoint_dir << "\n";
    return os.str();
}

}  // namespace steam
