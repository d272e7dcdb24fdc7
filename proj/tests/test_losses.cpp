#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "dagan/losses.hpp"
#include "doctest.h"

using namespace dagan;

namespace {
constexpr int kSize = 16;
}

TEST_CASE("identity loss vanishes on identical inputs") {
    std::mt19937_64 rng(1);
    Embedder emb(kSize, 1, 4, rng);
    Tensor img = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Var loss = identity_loss(constant(img), img, emb);
    CHECK(loss->value[0] == 0.0);
}

TEST_CASE("identity loss vanishes under a zero-weight embedder") {
    std::mt19937_64 rng(2);
    Embedder emb(kSize, 1, 4, rng);
    for (auto& [name, p] : emb.params())
        std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    Tensor a = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Tensor b = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    CHECK(identity_loss(constant(a), b, emb)->value[0] == 0.0);
}

TEST_CASE("identity loss equals the feature-space distance computed by hand") {
    std::mt19937_64 rng(3);
    Embedder emb(kSize, 1, 4, rng);
    Tensor fake = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    Tensor real = uniform({2, 1, kSize, kSize}, rng, -1, 1);
    auto [p1f, p2f] = emb.features(constant(fake), false);
    auto [p1r, p2r] = emb.features(constant(real), false);
    double want = 0;
    for (long i = 0; i < p1f->value.size(); ++i) {
        double d = p1f->value[i] - p1r->value[i];
        want += d * d;
    }
    for (long i = 0; i < p2f->value.size(); ++i) {
        double d = p2f->value[i] - p2r->value[i];
        want += d * d;
    }
    want /= 2.0;  // batch mean over the two samples
    double got = identity_loss(constant(fake), real, emb)->value[0];
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("identity loss is symmetric in value") {
    std::mt19937_64 rng(4);
    Embedder emb(kSize, 1, 4, rng);
    Tensor a = uniform({1, 1, kSize, kSize}, rng, -1, 1);
    Tensor b = uniform({1, 1, kSize, kSize}, rng, -1, 1);
    double ab = identity_loss(constant(a), b, emb)->value[0];
    double ba = identity_loss(constant(b), a, emb)->value[0];
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
}

TEST_CASE("pixel loss is zero for a perfect multi-scale reconstruction") {
    std::mt19937_64 rng(5);
    Tensor target = uniform({2, 1, 8, 8}, rng, -1, 1);
    Tensor mid = mean_pool2(target);
    Tensor small = mean_pool2(mid);
    Var loss = pixel_loss({constant(small), constant(mid), constant(target)}, target);
    CHECK(loss->value[0] == 0.0);
}

TEST_CASE("single-scale single-pixel case is the absolute difference") {
    Tensor target = Tensor::full({1, 1, 1, 1}, 0.5);
    Var loss = pixel_loss({constant(Tensor::full({1, 1, 1, 1}, 0.25))}, target);
    CHECK(loss->value[0] == doctest::Approx(0.25));
}

TEST_CASE("two constant scales average their per-scale mean errors") {
    Tensor target = Tensor::full({1, 1, 2, 2}, 0.5);
    Var small = constant(Tensor::full({1, 1, 1, 1}, 0.3));  // diff 0.2 at 1x1
    Var large = constant(Tensor::full({1, 1, 2, 2}, 0.6));  // diff 0.1 at 2x2
    Var loss = pixel_loss({small, large}, target);
    CHECK(loss->value[0] == doctest::Approx(0.15).epsilon(1e-9));
}

TEST_CASE("total variation of a constant image is zero") {
    Var loss = tv_loss(constant(Tensor::full({1, 1, 4, 4}, 0.7)));
    CHECK(loss->value[0] == 0.0);
}

TEST_CASE("total variation of the 2x2 ramp is exactly 2") {
    Tensor img({1, 1, 2, 2}, {0, 1, 0, 1});
    CHECK(tv_loss(constant(img))->value[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("total variation is positively homogeneous") {
    std::mt19937_64 rng(6);
    Tensor img = uniform({1, 1, 5, 5}, rng, -1, 1);
    double base = tv_loss(constant(img))->value[0];
    for (double alpha : {0.0, 0.5, 3.0}) {
        Tensor scaled = img;
        for (double& v : scaled.data) v *= alpha;
        CHECK(tv_loss(constant(scaled))->value[0] == doctest::Approx(alpha * base).epsilon(1e-9));
    }
}

TEST_CASE("total loss with unit components and default weights is 10.2001") {
    LossWeights w;
    LossReport rep;
    Var one = constant(Tensor::scalar(1.0));
    Var total = total_loss(one, one, one, one, w, &rep);
    CHECK(std::abs(total->value[0] - 10.2001) < 1e-6);
    CHECK(std::abs(rep.total - 10.2001) < 1e-6);
}

TEST_CASE("total loss is zero for zero components or zero weights") {
    Var zero = constant(Tensor::scalar(0.0));
    Var one = constant(Tensor::scalar(1.0));
    CHECK(total_loss(zero, zero, zero, zero, LossWeights{}, nullptr)->value[0] == 0.0);
    LossWeights none{0, 0, 0, 0};
    CHECK(total_loss(one, one, one, one, none, nullptr)->value[0] == 0.0);
}

TEST_CASE("total loss is linear in each component") {
    LossWeights w;
    auto total = [&](double a, double b, double c, double d) {
        return total_loss(constant(Tensor::scalar(a)), constant(Tensor::scalar(b)),
                          constant(Tensor::scalar(c)), constant(Tensor::scalar(d)), w, nullptr)
            ->value[0];
    };
    double base = total(1, 2, 3, 4);
    CHECK(total(1.5, 2, 3, 4) - base == doctest::Approx(0.5 * w.lambda_id).epsilon(1e-12));
    CHECK(total(1, 2.5, 3, 4) - base == doctest::Approx(0.5 * w.lambda_pixel).epsilon(1e-12));
    CHECK(total(1, 2, 3.5, 4) - base == doctest::Approx(0.5 * w.lambda_adv).epsilon(1e-12));
    CHECK(total(1, 2, 3, 4.5) - base == doctest::Approx(0.5 * w.lambda_tv).epsilon(1e-12));
}

TEST_CASE("negative weights are rejected") {
    LossWeights w;
    w.lambda_pixel = -1;
    CHECK_THROWS_AS(w.validate(), Error);
}

TEST_CASE("the report decomposes the weighted total") {
    LossWeights w;
    LossReport rep;
    Var total = total_loss(constant(Tensor::scalar(0.7)), constant(Tensor::scalar(0.2)),
                           constant(Tensor::scalar(1.3)), constant(Tensor::scalar(5.0)), w, &rep);
    double want = w.lambda_id * 0.7 + w.lambda_pixel * 0.2 + w.lambda_adv * 1.3 + w.lambda_tv * 5.0;
    CHECK(std::abs(total->value[0] - want) < 1e-6);
    CHECK(rep.l_id == doctest::Approx(0.7));
    CHECK(rep.l_pixel == doctest::Approx(0.2));
    CHECK(rep.l_adv == doctest::Approx(1.3));
    CHECK(rep.l_tv == doctest::Approx(5.0));
}

TEST_CASE("two distinct identities are separable by the embedder") {
    std::mt19937_64 rng(7);
    Embedder emb(kSize, 1, 2, rng);
    std::vector<std::pair<Tensor, int>> samples;
    for (int i = 0; i < 8; ++i) {
        samples.push_back({Tensor::full({1, kSize, kSize}, -0.8), 0});
        samples.push_back({Tensor::full({1, kSize, kSize}, 0.8), 1});
    }
    std::mt19937_64 train_rng(8);
    double acc = train_embedder(emb, samples, 30, 4, 1e-2, train_rng, 0.9);
    CHECK(acc == doctest::Approx(1.0));
}

TEST_CASE("embedding is deterministic for a fixed seed") {
    std::mt19937_64 rng1(9), rng2(9), rngx(10);
    Embedder a(kSize, 1, 4, rng1), b(kSize, 1, 4, rng2);
    Tensor x = uniform({2, 1, kSize, kSize}, rngx, -1, 1);
    CHECK(a.embed(x).data == b.embed(x).data);
}

TEST_CASE("cross entropy of uniform logits is log K") {
    Tensor logits = Tensor::zeros({2, 5});
    Var ce = cross_entropy(constant(logits), {0, 3});
    CHECK(ce->value[0] == doctest::Approx(std::log(5.0)).epsilon(1e-9));
}
