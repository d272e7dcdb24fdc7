#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "dagan/faceparse.hpp"
#include "doctest.h"

using namespace dagan;

namespace {
constexpr int kSize = 32;

FaceParams identity0() { return sample_identity(123, 0); }

// Lift an [H,W] mask to the [1,H,W] layout of a rendered image.
Tensor chan(const Tensor& m) { return Tensor({1, m.dim(0), m.dim(1)}, m.data); }
}  // namespace

TEST_CASE("masks are binary and pairwise disjoint") {
    RegionMasks m = parse(identity0(), kSize);
    for (long i = 0; i < m.skin.size(); ++i) {
        for (double v : {m.skin[i], m.keypoints[i], m.hair[i]})
            CHECK((v == 0.0 || v == 1.0));
        CHECK(m.skin[i] * m.keypoints[i] == 0.0);
        CHECK(m.skin[i] * m.hair[i] == 0.0);
        CHECK(m.keypoints[i] * m.hair[i] == 0.0);
    }
}

TEST_CASE("each mask is non-empty for a valid face") {
    RegionMasks m = parse(identity0(), kSize);
    auto count = [](const Tensor& t) {
        double s = 0;
        for (double v : t.data) s += v;
        return s;
    };
    CHECK(count(m.skin) > 0);
    CHECK(count(m.keypoints) > 0);
    CHECK(count(m.hair) > 0);
}

TEST_CASE("keypoint mask covers the eye centers and skin covers the face center") {
    FaceParams p = identity0();
    RegionMasks m = parse(p, kSize);
    auto at = [&](const Tensor& t, double u, double v) {
        int x = (int)(u * kSize), y = (int)(v * kSize);
        return t[y * kSize + x];
    };
    // Probe pixels from the generative geometry: both eye centers, the mouth
    // center, and the face center (between the features).
    CHECK(at(m.keypoints, 0.5 - p.eye_dx, p.eye_y) == 1.0);
    CHECK(at(m.keypoints, 0.5 + p.eye_dx, p.eye_y) == 1.0);
    CHECK(at(m.keypoints, 0.5, p.mouth_y) == 1.0);
    // Cheek probe: midway between the eye/brow outer edge and the face edge.
    double cheek = (p.eye_dx + std::max(p.brow_hw, p.eye_rx) + p.face_rx) / 2;
    CHECK(at(m.skin, 0.5 + cheek, p.eye_y) == 1.0);
}

TEST_CASE("mask totals agree with the rendered primitive occupancy") {
    FaceParams p = identity0();
    p.yaw_deg = 0;
    p.pitch_deg = 0;
    RegionGrids g = region_grids(p, kSize);
    RegionMasks m = parse(p, kSize);
    long kp_grid = 0, kp_mask = 0;
    for (long i = 0; i < (long)kSize * kSize; ++i) {
        kp_grid += g.keypoints[i] ? 1 : 0;
        kp_mask += m.keypoints[i] == 1.0 ? 1 : 0;
    }
    CHECK(kp_grid == kp_mask);
}

TEST_CASE("parsing ignores the pose of the query parameters") {
    FaceParams p = identity0();
    RegionMasks frontal = parse(p, kSize);
    p.yaw_deg = 60;
    p.pitch_deg = 15;
    RegionMasks posed = parse(p, kSize);
    CHECK(frontal.skin.data == posed.skin.data);
    CHECK(frontal.keypoints.data == posed.keypoints.data);
    CHECK(frontal.hair.data == posed.hair.data);
}

TEST_CASE("mask application is identity for ones, annihilator for zeros, and counts") {
    Tensor img = Tensor::full({1, 6, 6}, 1.0);
    Tensor ones = Tensor::full({1, 6, 6}, 1.0), zeros = Tensor::zeros({1, 6, 6});
    Tensor partial = Tensor::zeros({1, 6, 6});
    for (int i = 0; i < 7; ++i) partial[i] = 1.0;
    RegionalImageVars v = apply_masks(constant(img), ones, zeros, partial);
    CHECK(v.skin->value.data == img.data);
    for (double x : v.keypoints->value.data) CHECK(x == 0.0);
    double s = 0;
    for (double x : v.hair->value.data) s += x;
    CHECK(s == doctest::Approx(7.0));
}

TEST_CASE("masking binary masks is idempotent") {
    FaceParams p = identity0();
    RegionMasks m = parse(p, kSize);
    Tensor img = render(p, kSize, 1);
    RegionalImageVars once = apply_masks(constant(img), chan(m.skin), chan(m.keypoints),
                                         chan(m.hair));
    RegionalImageVars twice = apply_masks(once.skin, chan(m.skin), chan(m.keypoints),
                                          chan(m.hair));
    CHECK(once.skin->value.data == twice.skin->value.data);
}

TEST_CASE("gradient of a masked sum is exactly the mask") {
    FaceParams p = identity0();
    RegionMasks m = parse(p, kSize);
    Tensor img = render(p, kSize, 1);
    Var in = input_var(img);
    RegionalImageVars v = apply_masks(in, chan(m.skin), chan(m.keypoints), chan(m.hair));
    backward(reduce_sum(v.keypoints), Tensor::scalar(1.0));
    Tensor kp = chan(m.keypoints);
    for (long i = 0; i < img.size(); ++i) CHECK(in->grad[i] == kp[i]);
}

TEST_CASE("mask shape mismatches are rejected") {
    Tensor img = Tensor::zeros({1, 8, 8});
    Tensor wrong = Tensor::zeros({1, 4, 4});
    CHECK_THROWS_AS(apply_masks(constant(img), wrong, wrong, wrong), Error);
}
