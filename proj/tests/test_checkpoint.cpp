#include "doctest.h"

#include <fstream>

#include "ccdm/checkpoint.hpp"
#include "ccdm/denoiser.hpp"
#include "support/test_support.hpp"

using namespace ccdm;
using ccdm::testing::TempDir;

TEST_CASE("checkpoint round-trip is lossless") {
    TempDir tmp("ckpt");
    DenoiserConfig cfg;
    cfg.lookback = 6;
    cfg.horizon = 4;
    cfg.channels = 2;
    cfg.hidden_dim = 8;
    cfg.heads = 2;

    SUBCASE("float with adam state") {
        RngStream rng(3);
        Checkpoint<float> ckpt;
        ckpt.config_fingerprint = "abc123";
        ckpt.params = init_denoiser_params<float>(cfg, rng);
        AdamState<float> adam;
        adam.lr = 0.003;
        adam.step = 42;
        GradMap<float> grads;
        for (const auto& [name, t] : ckpt.params) grads.emplace(name, Tensor<float>::normal(t.shape, rng));
        adam_step(ckpt.params, grads, adam);
        ckpt.adam = adam;

        save_checkpoint(tmp.file("a.ckpt"), ckpt);
        auto back = load_checkpoint_f32(tmp.file("a.ckpt"));
        CHECK(back.config_fingerprint == "abc123");
        CHECK(hash_params(back.params) == hash_params(ckpt.params));
        REQUIRE(back.adam.has_value());
        CHECK(back.adam->step == 43);
        CHECK(back.adam->lr == 0.003);
        CHECK(hash_params(back.adam->m) == hash_params(ckpt.adam->m));
        CHECK(hash_params(back.adam->v) == hash_params(ckpt.adam->v));
        for (const auto& [name, t] : ckpt.params) CHECK(back.params.at(name).values == t.values);
    }
    SUBCASE("double without adam state") {
        RngStream rng(5);
        Checkpoint<double> ckpt;
        ckpt.params = init_denoiser_params<double>(cfg, rng);
        save_checkpoint(tmp.file("b.ckpt"), ckpt);
        auto back = load_checkpoint_f64(tmp.file("b.ckpt"));
        CHECK_FALSE(back.adam.has_value());
        for (const auto& [name, t] : ckpt.params) CHECK(back.params.at(name).values == t.values);
    }
    SUBCASE("precision mismatch is reported") {
        RngStream rng(7);
        Checkpoint<float> ckpt;
        ckpt.params = init_denoiser_params<float>(cfg, rng);
        save_checkpoint(tmp.file("c.ckpt"), ckpt);
        CHECK_THROWS_WITH_AS(load_checkpoint_f64(tmp.file("c.ckpt")), doctest::Contains("32-bit"),
                             TrainingError);
    }
    SUBCASE("garbage file is rejected") {
        std::ofstream(tmp.file("junk.ckpt")) << "not a checkpoint";
        CHECK_THROWS_AS(load_checkpoint_f32(tmp.file("junk.ckpt")), TrainingError);
    }
}
