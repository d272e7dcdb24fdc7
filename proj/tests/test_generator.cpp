#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "dagan/generator.hpp"
#include "doctest.h"

using namespace dagan;

namespace {
GeneratorConfig desk_config() {
    GeneratorConfig cfg;
    cfg.image_size = 32;
    cfg.base_channels = 16;
    cfg.channels = 1;
    cfg.scales = 3;
    return cfg;
}
}  // namespace

TEST_CASE("output scales end at the input resolution") {
    std::mt19937_64 rng(1);
    Generator gen(desk_config(), rng);
    Tensor x = uniform({2, 1, 32, 32}, rng, -1, 1);
    MultiScaleOutput out = gen.generate(x);
    REQUIRE((int)out.images.size() == 3);
    CHECK(out.images[0].shape == Shape{2, 1, 8, 8});
    CHECK(out.images[1].shape == Shape{2, 1, 16, 16});
    CHECK(out.images[2].shape == Shape{2, 1, 32, 32});
}

TEST_CASE("generation is deterministic and bounded") {
    std::mt19937_64 rng1(5), rng2(5), rngx(6);
    Generator a(desk_config(), rng1), b(desk_config(), rng2);
    Tensor x = uniform({1, 1, 32, 32}, rngx, -1, 1);
    MultiScaleOutput oa = a.generate(x), ob = b.generate(x);
    for (size_t s = 0; s < oa.images.size(); ++s) {
        CHECK(oa.images[s].data == ob.images[s].data);
        CHECK(oa.images[s].all_finite());
        for (double v : oa.images[s].data) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("parameter count is stable, monotone in width, and matches the frozen constant") {
    std::mt19937_64 rng(1);
    Generator a(desk_config(), rng), b(desk_config(), rng);
    CHECK(a.count_parameters() == b.count_parameters());
    GeneratorConfig wide = desk_config();
    wide.base_channels = 32;
    Generator c(wide, rng);
    CHECK(c.count_parameters() > a.count_parameters());
    // Regression constant for the 32x32 / base-16 configuration.
    CHECK(a.count_parameters() == 99765);
}

TEST_CASE("forcing mu to zero reproduces an untouched twin bit-for-bit") {
    std::mt19937_64 rng1(9), rng2(9), rngx(10);
    Generator tuned(desk_config(), rng1);
    Generator baseline(desk_config(), rng2);  // identical weights, mu never moved
    for (auto& blk : tuned.attention_blocks()) blk.mu().value[0] = 0.4;
    Tensor x = uniform({1, 1, 32, 32}, rngx, -1, 1);
    Tensor moved = tuned.generate(x).images.back();
    tuned.force_attention_identity();
    Tensor back = tuned.generate(x).images.back();
    Tensor want = baseline.generate(x).images.back();
    double dmoved = 0, dback = 0;
    for (long i = 0; i < want.size(); ++i) {
        dmoved = std::max(dmoved, std::abs(moved[i] - want[i]));
        dback = std::max(dback, std::abs(back[i] - want[i]));
    }
    CHECK(dmoved > 1e-7);  // nonzero mu actually changes the output
    CHECK(dback <= 1e-7);
}

TEST_CASE("every trainable parameter receives gradient") {
    std::mt19937_64 rng(21);
    GeneratorConfig cfg = desk_config();
    cfg.image_size = 16;
    cfg.scales = 2;  // a 16px net only has two resolution stages
    Generator gen(cfg, rng);
    for (auto& blk : gen.attention_blocks()) blk.mu().value[0] = 0.3;
    Tensor x = uniform({2, 1, 16, 16}, rng, -1, 1);
    MultiScaleVars out = gen.forward(x, true);
    Var loss = reduce_sum(square(out.images.back()));
    for (size_t s = 0; s + 1 < out.images.size(); ++s)
        loss = add(loss, reduce_sum(square(out.images[s])));
    GradMap grads = backward(loss, Tensor::scalar(1.0));
    long trainable = 0, with_grad = 0;
    for (const auto& [name, p] : gen.params()) {
        if (!p->trainable) continue;
        ++trainable;
        auto it = grads.find(p.get());
        REQUIRE(it != grads.end());
        bool nonzero = false;
        for (double g : it->second.data) nonzero = nonzero || g != 0.0;
        if (nonzero) ++with_grad;
    }
    CHECK(trainable == with_grad);
}

TEST_CASE("invalid configurations are rejected") {
    std::mt19937_64 rng(1);
    GeneratorConfig cfg = desk_config();
    cfg.image_size = 33;
    CHECK_THROWS_AS(Generator(cfg, rng), Error);
    cfg = desk_config();
    cfg.channels = 2;
    CHECK_THROWS_AS(Generator(cfg, rng), Error);
    cfg = desk_config();
    cfg.scales = 99;
    CHECK_THROWS_AS(Generator(cfg, rng), Error);
    cfg = desk_config();
    cfg.attention_stages = {99};
    CHECK_THROWS_AS(Generator(cfg, rng), Error);
}

TEST_CASE("input shape mismatches are rejected") {
    std::mt19937_64 rng(2);
    Generator gen(desk_config(), rng);
    CHECK_THROWS_AS(gen.generate(Tensor::zeros({1, 1, 16, 16})), Error);
    CHECK_THROWS_AS(gen.generate(Tensor::zeros({1, 3, 32, 32})), Error);
}
