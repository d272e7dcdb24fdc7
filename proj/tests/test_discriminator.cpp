#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "dagan/discriminator.hpp"
#include "doctest.h"

using namespace dagan;

namespace {

constexpr int kSize = 16;

void zero_params(ParamStore& store) {
    for (auto& [name, p] : store) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
}

// Finds an input x such that D(x) outputs exactly `target`, by Newton steps
// on the logit along the input gradient. The pre-sigmoid network is piecewise
// linear in its input, so each step solves a linear region exactly. Lets a
// test dictate a discriminator's output without touching its weights.
Tensor input_with_probability(const Discriminator& d, std::mt19937_64& rng, double target) {
    auto logit = [](double p) { return std::log(p / (1 - p)); };
    double want = logit(target);
    for (int tries = 0; tries < 8; ++tries) {
        Parameter px{"probe", uniform({1, 1, kSize, kSize}, rng, -1, 1), true};
        for (int it = 0; it < 200; ++it) {
            Var p = reduce_sum(d.forward(leaf(px), false));
            double val = p->value[0];
            if (val > 0 && val < 1 && std::abs(val - target) < 1e-12) {
                REQUIRE(std::abs(d.discriminate(px.value)[0] - target) < 1e-9);
                return px.value;
            }
            GradMap g = backward(p, Tensor::scalar(1.0));
            auto gi = g.find(&px);
            REQUIRE(gi != g.end());
            const Tensor& gp = gi->second;
            double denom = std::clamp(val * (1 - val), 1e-12, 1.0);
            double n2 = 0;
            for (double v : gp.data) n2 += (v / denom) * (v / denom);
            if (n2 < 1e-30) break;  // flat region: restart from a new point
            double step = -(logit(std::clamp(val, 1e-15, 1 - 1e-15)) - want) / n2;
            for (long i = 0; i < px.value.size(); ++i)
                px.value[i] += step * gp[i] / denom;
        }
    }
    FAIL("no input reached the target probability");
    return Tensor::zeros({1, 1, kSize, kSize});
}

RegionBatch same_all(const Tensor& img) { return RegionBatch{img, img, img, img}; }

}  // namespace

TEST_CASE("zero-weight discriminator outputs exactly one half") {
    std::mt19937_64 rng(1);
    ParamStore store;
    Discriminator d(store, "D/f", kSize, 1, 8, rng);
    zero_params(store);
    Tensor p = d.discriminate(uniform({3, 1, kSize, kSize}, rng, -1, 1));
    REQUIRE(p.shape == Shape{3});
    for (double v : p.data) CHECK(v == 0.5);
}

TEST_CASE("outputs are deterministic and strictly inside (0,1)") {
    std::mt19937_64 rng(2);
    ParamStore store;
    Discriminator d(store, "D/f", kSize, 1, 8, rng);
    Tensor x = uniform({8, 1, kSize, kSize}, rng, -1, 1);
    Tensor a = d.discriminate(x), b = d.discriminate(x);
    CHECK(a.data == b.data);
    for (double v : a.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("constant-half discriminators give the 2 ln 2 loss") {
    std::mt19937_64 rng(3);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    zero_params(bank.params());
    Tensor real = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Tensor fake = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    AdvLossReport rep;
    Var loss = adv_loss_D(bank, same_all(real), same_all(fake), all_regions(), &rep);
    for (auto v : {rep.l_f, rep.l_s, rep.l_k, rep.l_h}) {
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(2 * std::log(2.0)).epsilon(1e-9));
    }
    CHECK(loss->value[0] == doctest::Approx(8 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("a 0.8 real / 0.3 fake pair yields -(ln 0.8 + ln 0.7)") {
    std::mt19937_64 rng(4);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    Tensor real = input_with_probability(bank.get('f'), rng, 0.8);
    Tensor fake = input_with_probability(bank.get('f'), rng, 0.3);
    AdvLossReport rep;
    adv_loss_D(bank, same_all(real), same_all(fake), {'f'}, &rep);
    REQUIRE(rep.l_f.has_value());
    CHECK(std::abs(*rep.l_f - 0.5798184952529422) < 1e-6);
    CHECK(std::abs(*rep.l_f - (-(std::log(0.8) + std::log(0.7)))) < 1e-8);
}

TEST_CASE("generator-side loss with all-half discriminators is 4 ln 2") {
    std::mt19937_64 rng(5);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    zero_params(bank.params());
    Tensor fake = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Var v = constant(fake);
    RegionVars fr{v, v, v, v};
    AdvLossReport rep;
    Var loss = adv_loss_G(bank, fr, all_regions(), &rep);
    CHECK(loss->value[0] == doctest::Approx(4 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("generator-side loss sums per-region terms (5 ln 2 case)") {
    std::mt19937_64 rng(6);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    zero_params(bank.params());  // f, k, h output 0.5
    Tensor dir = uniform({1, 1, kSize, kSize}, rng, -1, 1);
    // Give D_s fresh random weights, then pick an input it scores at 1/4.
    std::mt19937_64 rng2(7);
    ParamStore fresh;
    Discriminator ds(fresh, "D/s", kSize, 1, 8, rng2);
    Tensor skin = input_with_probability(ds, rng2, 0.25);
    for (auto& [name, p] : fresh)
        bank.params().get(name).value = p->value;
    RegionVars fr{constant(dir), constant(skin), constant(dir), constant(dir)};
    AdvLossReport rep;
    Var loss = adv_loss_G(bank, fr, all_regions(), &rep);
    CHECK(std::abs(loss->value[0] - 5 * std::log(2.0)) < 1e-6);
}

TEST_CASE("the report total equals the sum of its parts") {
    std::mt19937_64 rng(8);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    Tensor real = uniform({3, 1, kSize, kSize}, rng, -1, 1);
    Tensor fake = uniform({3, 1, kSize, kSize}, rng, -1, 1);
    AdvLossReport rep;
    Var loss = adv_loss_D(bank, same_all(real), same_all(fake), all_regions(), &rep);
    CHECK(std::abs(rep.l_adv - (*rep.l_f + *rep.l_s + *rep.l_k + *rep.l_h)) < 1e-6);
    CHECK(std::abs(loss->value[0] - rep.l_adv) < 1e-9);
}

TEST_CASE("identical real and fake batches are worth at least 2 ln 2 per region") {
    std::mt19937_64 rng(9);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    Tensor img = uniform({4, 1, kSize, kSize}, rng, -1, 1);
    AdvLossReport rep;
    adv_loss_D(bank, same_all(img), same_all(img), all_regions(), &rep);
    for (auto v : {rep.l_f, rep.l_s, rep.l_k, rep.l_h})
        CHECK(*v >= 2 * std::log(2.0) - 1e-9);
}

TEST_CASE("discriminator loss sends no gradient into generator-side tensors") {
    std::mt19937_64 rng(10);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    Tensor real = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Tensor fake = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Var loss = adv_loss_D(bank, same_all(real), same_all(fake), all_regions());
    GradMap grads = backward(loss, Tensor::scalar(1.0));
    // Every parameter with a gradient belongs to the bank; nothing else exists
    // in this graph, so check the bank got nonzero gradients.
    long nonzero = 0;
    for (const auto& [p, g] : grads) {
        bool any = false;
        for (double v : g.data) any = any || v != 0.0;
        if (any) ++nonzero;
    }
    CHECK(nonzero > 0);
}

TEST_CASE("generator loss leaves discriminator parameters without gradients") {
    std::mt19937_64 rng(11);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    Var fake = input_var(uniform({2, 1, kSize, kSize}, rng, -1, 1));
    RegionVars fr{fake, fake, fake, fake};
    Var loss = adv_loss_G(bank, fr, all_regions());
    GradMap grads = backward(loss, Tensor::scalar(1.0));
    for (const auto& [name, p] : bank.params()) CHECK(grads.count(p.get()) == 0);
    bool any = false;
    for (double v : fake->grad.data) any = any || v != 0.0;
    CHECK(any);  // the generator side does receive gradient
}

TEST_CASE("regions only see their own images") {
    std::mt19937_64 rng(12);
    DiscriminatorBank bank(kSize, 1, 8, rng);
    Tensor real = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Tensor fake = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    AdvLossReport before;
    adv_loss_D(bank, same_all(real), same_all(fake), all_regions(), &before);
    RegionBatch fake2 = same_all(fake);
    fake2.hair = fake;
    fake2.hair.data[5] += 0.25;  // only the hair view changes
    AdvLossReport after;
    adv_loss_D(bank, same_all(real), fake2, all_regions(), &after);
    CHECK(*before.l_s == *after.l_s);
    CHECK(*before.l_k == *after.l_k);
    CHECK(*before.l_f == *after.l_f);  // full frame unchanged here
    CHECK(*before.l_h != *after.l_h);
}
