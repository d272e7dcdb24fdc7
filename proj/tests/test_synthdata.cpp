#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "dagan/synthdata.hpp"
#include "doctest.h"

using namespace dagan;

TEST_CASE("rendering is deterministic") {
    FaceParams p = sample_identity(42, 3);
    p.yaw_deg = 45;
    Tensor a = render(p, 32, 1), b = render(p, 32, 1);
    CHECK(a.data == b.data);
}

TEST_CASE("frontal renders are left-right symmetric") {
    FaceParams p = sample_identity(7, 0);
    p.yaw_deg = 0;
    p.pitch_deg = 0;
    Tensor img = render(p, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 16; ++x)
            CHECK(std::abs(img[y * 32 + x] - img[y * 32 + (31 - x)]) < 1e-6);
}

TEST_CASE("a 90-degree yaw shows at most half the face width") {
    FaceParams p = sample_identity(7, 0);
    p.yaw_deg = 0;
    Tensor frontal = render(p, 64, 1);
    p.yaw_deg = 90;
    Tensor profile = render(p, 64, 1);
    auto occupied_width = [](const Tensor& img) {
        // Count columns that differ from the background (top-left corner value).
        double bg = img[0];
        int lo = 64, hi = -1;
        for (int x = 0; x < 64; ++x)
            for (int y = 0; y < 64; ++y)
                if (std::abs(img[y * 64 + x] - bg) > 1e-9) {
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
        return hi < lo ? 0 : hi - lo + 1;
    };
    CHECK(occupied_width(profile) <= occupied_width(frontal) / 2 + 1);
}

TEST_CASE("dataset size is the identity-pose product") {
    Dataset ds = make_dataset(16, default_yaws(), default_pitches(), 5);
    CHECK((int)ds.pairs.size() == 16 * 13);
    CHECK(ds.n_identities == 16);
}

TEST_CASE("train and test identities do not overlap") {
    Dataset ds = make_dataset(16, default_yaws(), default_pitches(), 5);
    std::set<int> train_ids, test_ids;
    for (size_t i : ds.train_indices()) train_ids.insert(ds.pairs[i].identity);
    for (size_t i : ds.test_indices()) test_ids.insert(ds.pairs[i].identity);
    CHECK(!train_ids.empty());
    CHECK(!test_ids.empty());
    std::vector<int> both;
    std::set_intersection(train_ids.begin(), train_ids.end(), test_ids.begin(), test_ids.end(),
                          std::back_inserter(both));
    CHECK(both.empty());
    CHECK(ds.train_indices().size() + ds.test_indices().size() == ds.pairs.size());
}

TEST_CASE("the frontal target of an identity is pose-independent with unit gain") {
    Dataset ds = make_dataset(4, {-60, 0, 60}, {0}, 9);
    for (int id = 0; id < 4; ++id) {
        const Tensor* first = nullptr;
        for (const auto& pair : ds.pairs) {
            if (pair.identity != id) continue;
            if (!first)
                first = &pair.frontal;
            else
                CHECK(pair.frontal.data == first->data);
        }
    }
}

TEST_CASE("different seeds change geometry but not shapes") {
    Dataset a = make_dataset(4, {0, 30}, {0}, 1);
    Dataset b = make_dataset(4, {0, 30}, {0}, 2);
    REQUIRE(a.pairs.size() == b.pairs.size());
    bool any_diff = false;
    for (size_t i = 0; i < a.pairs.size(); ++i) {
        REQUIRE(a.pairs[i].profile.shape == b.pairs[i].profile.shape);
        any_diff = any_diff || a.pairs[i].profile.data != b.pairs[i].profile.data;
    }
    CHECK(any_diff);
}

TEST_CASE("dataset generation is reproducible from the seed") {
    Dataset a = make_dataset(6, default_yaws(), default_pitches(), 77);
    Dataset b = make_dataset(6, default_yaws(), default_pitches(), 77);
    for (size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].profile.data == b.pairs[i].profile.data);
        CHECK(a.pairs[i].frontal.data == b.pairs[i].frontal.data);
        CHECK(a.pairs[i].yaw_deg == b.pairs[i].yaw_deg);
    }
}

TEST_CASE("pixel values stay in the documented range") {
    Dataset ds = make_dataset(4, default_yaws(), default_pitches(), 3);
    for (const auto& pair : ds.pairs)
        for (double v : pair.profile.data) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
}
