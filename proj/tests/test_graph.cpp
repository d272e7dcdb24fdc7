#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "dagan/gradcheck.hpp"
#include "dagan/graph.hpp"
#include "doctest.h"

using namespace dagan;

TEST_CASE("finite differences of a sum are all ones") {
    std::mt19937_64 rng(1);
    Tensor x = uniform({3, 4}, rng, -2, 2);
    Tensor g = finite_diff_grad(
        [](const Tensor& t) {
            double s = 0;
            for (long i = 0; i < t.size(); ++i) s += t[i];
            return s;
        },
        x);
    for (long i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("finite differences of x^2 at 3 give 6") {
    Tensor x = Tensor::scalar(3.0);
    Tensor g = finite_diff_grad([](const Tensor& t) { return t[0] * t[0]; }, x);
    CHECK(std::abs(g[0] - 6.0) < 1e-9);
}

TEST_CASE("total-variation backward matches finite differences on a 3x3 ramp") {
    Tensor x = Tensor::zeros({1, 1, 3, 3});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) x[i * 3 + j] = 0.1 + 0.3 * j + 0.05 * i;
    Var in = input_var(x);
    Var loss = tv_op(in);
    backward(loss, Tensor::scalar(1.0));
    Tensor fd = finite_diff_grad(
        [](const Tensor& t) { return tv_op(constant(t))->value[0]; }, x);
    CHECK(grad_rel_error(in->grad, fd) < 1e-6);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x = uniform({2, 5, 6}, rng, -30, 30);
        Tensor y = softmax_axis(constant(x), 2)->value;
        for (int n = 0; n < 2; ++n)
            for (int r = 0; r < 5; ++r) {
                double s = 0;
                for (int c = 0; c < 6; ++c) {
                    double v = y[(n * 5 + r) * 6 + c];
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                    s += v;
                }
                CHECK(std::abs(s - 1.0) < 1e-6);
            }
    }
}

TEST_CASE("forward evaluation is deterministic for a fixed seed") {
    auto build = [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        Tensor x = uniform({2, 3, 8, 8}, rng, -1, 1);
        Tensor w = randn({4, 3, 3, 3}, rng, 0.1);
        Tensor b = randn({4}, rng, 0.1);
        return sigmoid(conv2d(constant(x), constant(w), constant(b), 2, 1))->value;
    };
    Tensor a = build(42), b = build(42);
    CHECK(a.data == b.data);
}

TEST_CASE("reshape and transpose preserve the multiset of values") {
    std::mt19937_64 rng(3);
    Tensor x = uniform({3, 5}, rng, -1, 1);
    Tensor r = reshape(constant(x), {5, 3})->value;
    Tensor t = transpose2(constant(x))->value;
    auto sorted = [](Tensor v) {
        std::sort(v.data.begin(), v.data.end());
        return v.data;
    };
    CHECK(sorted(x) == sorted(r));
    CHECK(sorted(x) == sorted(t));
}

namespace {
// Direct convolution, the slow reference for the matrix-product implementation.
Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int O = w.dim(0), K = w.dim(2);
    int Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
    Tensor out = Tensor::zeros({N, O, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o)
            for (int i = 0; i < Ho; ++i)
                for (int j = 0; j < Wo; ++j) {
                    double acc = b[o];
                    for (int c = 0; c < C; ++c)
                        for (int p = 0; p < K; ++p)
                            for (int q = 0; q < K; ++q) {
                                int y = i * stride + p - pad, z = j * stride + q - pad;
                                if (y < 0 || y >= H || z < 0 || z >= W) continue;
                                acc += x[((long)(n * C + c) * H + y) * W + z] *
                                       w[((long)(o * C + c) * K + p) * K + q];
                            }
                    out[((long)(n * O + o) * Ho + i) * Wo + j] = acc;
                }
    return out;
}
}  // namespace

TEST_CASE("convolution matches the direct reference at stride 1 and 2") {
    std::mt19937_64 rng(11);
    for (int stride : {1, 2}) {
        Tensor x = uniform({2, 3, 8, 8}, rng, -1, 1);
        Tensor w = randn({5, 3, 3, 3}, rng, 0.5);
        Tensor b = randn({5}, rng, 0.5);
        Tensor got = conv2d(constant(x), constant(w), constant(b), stride, 1)->value;
        Tensor want = conv_reference(x, w, b, stride, 1);
        REQUIRE(got.shape == want.shape);
        for (long i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
    }
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
    // <conv(x), y> == <x, conv_transpose(y)> for shared weights and zero bias.
    std::mt19937_64 rng(13);
    Tensor x = uniform({2, 3, 8, 8}, rng, -1, 1);
    // conv reads the weight as [O,Ci,K,K]; the transpose reads the same flat
    // buffer as [Ci_t,O_t,K,K] with Ci_t = O and O_t = Ci, so one tensor serves both.
    Tensor w = randn({4, 3, 4, 4}, rng, 0.5);
    Tensor zero4 = Tensor::zeros({4}), zero3 = Tensor::zeros({3});
    Tensor y = uniform({2, 4, 4, 4}, rng, -1, 1);
    // conv: x [2,3,8,8] -> [2,4,4,4] with stride 2 pad 1; transpose goes back up.
    Tensor cx = conv2d(constant(x), constant(w), constant(zero4), 2, 1)->value;
    Tensor ty = conv_transpose2d(constant(y), constant(w), constant(zero3), 2, 1)->value;
    // conv_transpose adjoint needs matched geometry: output of ty must equal x's shape.
    REQUIRE(ty.shape == x.shape);
    double lhs = 0, rhs = 0;
    for (long i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
    for (long i = 0; i < x.size(); ++i) rhs += x[i] * ty[i];
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("placeholder graphs re-evaluate under new bindings") {
    Var p = placeholder("x");
    Var y = add(square(p), scalar_mul(p, 2.0));  // x^2 + 2x
    Tensor out = forward(y, {{"x", Tensor::scalar(3.0)}});
    CHECK(out[0] == doctest::Approx(15.0));
    out = forward(y, {{"x", Tensor::scalar(-1.0)}});
    CHECK(out[0] == doctest::Approx(-1.0));
}

TEST_CASE("shape mismatches are rejected") {
    CHECK_THROWS_AS(add(constant(Tensor::zeros({2})), constant(Tensor::zeros({3}))), Error);
    CHECK_THROWS_AS(matmul(constant(Tensor::zeros({2, 3})), constant(Tensor::zeros({2, 3}))),
                    Error);
    CHECK_THROWS_AS(batched_matmul_bt(constant(Tensor::zeros({1, 2, 3})),
                                      constant(Tensor::zeros({1, 2, 4}))),
                    Error);
}

TEST_CASE("batched matmul against transposed operand matches the two-step form") {
    std::mt19937_64 rng(17);
    Tensor a = uniform({3, 4, 6}, rng, -1, 1);
    Tensor b = uniform({3, 5, 6}, rng, -1, 1);
    Tensor fused = batched_matmul_bt(constant(a), constant(b))->value;
    Tensor twostep = batched_matmul(constant(a), batched_transpose(constant(b)))->value;
    REQUIRE(fused.shape == twostep.shape);
    for (long i = 0; i < fused.size(); ++i) CHECK(std::abs(fused[i] - twostep[i]) < 1e-12);
}

TEST_CASE("gradients accumulate across shared sub-expressions") {
    Var x = input_var(Tensor::scalar(2.0));
    Var y = add(mul(x, x), x);  // x^2 + x, dy/dx = 2x + 1 = 5
    backward(y, Tensor::scalar(1.0));
    CHECK(x->grad[0] == doctest::Approx(5.0));
}
