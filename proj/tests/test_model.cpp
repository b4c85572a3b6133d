#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "steam/flops.hpp"
#include "steam/model.hpp"
#include "steam/tape.hpp"

using namespace steam;

TEST_CASE("placement plans match the reference vectors") {
    const auto p50 = plan_placement(std::vector<int>{3, 4, 6, 3});
    CHECK(p50.units_per_stage == std::vector<int>{1, 1, 2, 1});
    CHECK(p50.insertion_indices[2] == std::vector<int>{3, 6});
    CHECK(p50.insertion_indices[0] == std::vector<int>{3});
    CHECK(p50.insertion_indices[3] == std::vector<int>{3});

    const auto p18 = plan_placement(std::vector<int>{2, 2, 2, 2});
    CHECK(p18.units_per_stage == std::vector<int>{1, 1, 1, 1});
    for (const auto& idx : p18.insertion_indices) CHECK(idx == std::vector<int>{2});

    CHECK(plan_placement(std::vector<int>{3, 4, 23, 3}).units_per_stage ==
          std::vector<int>{1, 1, 6, 1});
    CHECK(plan_placement(std::vector<int>{4, 8, 4}).units_per_stage == std::vector<int>{1, 2, 1});
}

TEST_CASE("every stage ends with a unit") {
    for (int nb : {1, 2, 3, 4, 5, 7, 8, 9, 16, 23}) {
        const auto plan = plan_placement(std::vector<int>{nb});
        CHECK(plan.insertion_indices[0].back() == nb);
        CHECK(plan.units_per_stage[0] == (nb + 3) / 4);
        for (int idx : plan.insertion_indices[0]) {
            CHECK(idx >= 1);
            CHECK(idx <= nb);
        }
    }
}

TEST_CASE("parameter accounting matches the reference totals") {
    CHECK(count_params(plan_placement(std::vector<int>{2, 2, 2, 2}), 8) == 256);
    CHECK(count_params(plan_placement(std::vector<int>{3, 4, 6, 3}), 8) == 320);
    CHECK(count_params(plan_placement(std::vector<int>{3, 4, 23, 3}), 8) == 576);
    CHECK(count_params(plan_placement(std::vector<int>{4, 8, 4}), 8) == 256);
}

TEST_CASE("comparison table closed forms") {
    const auto rows = reference_param_table(resnet50_spec(), 8, 16.0, 7);
    auto find = [&](const std::string& name) {
        for (const auto& r : rows)
            if (r.module == name) return r.params;
        FAIL("missing row " << name);
        return std::int64_t{0};
    };
    CHECK(find("SE") == 2514944);  // (2/16) * (3*256^2 + 4*512^2 + 6*1024^2 + 3*2048^2)
    CHECK(find("GCT") == 16);      // sum of block counts
    CHECK(find("MCA") == 30208);
    CHECK(find("STEAM") == 320);
    CHECK(find("CBAM") == 2514944 + 16 * 49);

    const auto r18 = reference_param_table(resnet18_spec(), 8, {}, {});
    for (const auto& row : r18)
        if (row.module == "GCT") CHECK(row.params == 8);
}

TEST_CASE("analytic flops equal measured flops exactly") {
    const StageSpec spec{{1, 1}, {8, 16}, {{28, 28}, {14, 14}}};
    const SteamConfig cfg;
    const auto plan = plan_placement(spec);
    Rng rng(3);
    CHECK(count_flops(plan, spec, cfg) == static_cast<double>(measure_flops(plan, spec, cfg, rng)));

    SteamConfig variants;
    variants.channel_pool = Pooling::AvgMaxConcat;
    variants.spatial_pool = Pooling::Max;
    variants.inter_activation = Activation::Relu;
    variants.channel_hops = 2;
    CHECK(count_flops(plan, spec, variants) ==
          static_cast<double>(measure_flops(plan, spec, variants, rng)));
}

TEST_CASE("resnet-50 flop delta is in the expected band") {
    const double gflops = count_flops(plan_placement(resnet50_spec()), resnet50_spec(), SteamConfig{}) / 1e9;
    CHECK(gflops > 3.57e-3 / 2);
    CHECK(gflops < 3.57e-3 * 2);
}

TEST_CASE("desk model exposes the planned steam parameters") {
    ModelConfig mc;
    mc.spec = StageSpec{{1, 1, 1}, {8, 16, 32}, {{28, 28}, {14, 14}, {7, 7}}};
    mc.steam = SteamConfig{};
    Rng rng(5);
    DeskCnn model(mc, rng);
    CHECK(model.plan().total_units() == 3);
    CHECK(model.steam_param_count() == 192);

    ModelConfig baseline = mc;
    baseline.steam.reset();
    Rng rng2(5);
    DeskCnn base(baseline, rng2);
    CHECK(model.param_count() == base.param_count() + 192);
    CHECK(model.config_digest() != base.config_digest());
}

TEST_CASE("desk model forward produces logits and gradients") {
    ModelConfig mc;
    mc.spec = StageSpec{{1, 1}, {4, 8}, {{14, 14}, {7, 7}}};
    mc.steam = SteamConfig{};
    Rng rng(7);
    DeskCnn model(mc, rng);

    Tensor x = Tensor::zeros({2, 1, 14, 14});
    for (auto& v : x.data) v = rng.normal();
    Tape t;
    std::vector<VarId> pv;
    const VarId logits = model.forward(t, x, true, &rng, &pv);
    CHECK(t.value(logits).shape == Shape{2, 10});
    CHECK(pv.size() == model.params().size());

    const VarId loss = t.cross_entropy(logits, {3, 7});
    t.backward(loss);
    bool any_steam_grad = false;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (model.params()[i].name.find("steam") == std::string::npos) continue;
        for (double g : t.grad(pv[i]))
            if (g != 0.0) any_steam_grad = true;
    }
    CHECK(any_steam_grad);
}

TEST_CASE("model rejects wrong input shapes") {
    ModelConfig mc;
    mc.spec = StageSpec{{1}, {4}, {{14, 14}}};
    Rng rng(7);
    DeskCnn model(mc, rng);
    Tape t;
    CHECK_THROWS_AS(model.forward(t, Tensor::zeros({2, 3, 14, 14}), false, nullptr), DimensionError);
}

TEST_CASE("accounting report text includes totals") {
    const auto rep = account(resnet50_spec(), SteamConfig{}, 16.0, 7);
    CHECK(rep.added_params == 320);
    const std::string text = rep.to_text();
    CHECK(text.find("total added params: 320") != std::string::npos);
    const std::string csv = rep.to_csv();
    CHECK(csv.rfind("stage,units,params,flops", 0) == 0);
}
