#include "dagan/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dagan {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFaceCx = 0.5, kFaceCy = 0.55;

struct EllipseP {
    double cx, cy, rx, ry;
    bool contains(double u, double v) const {
        if (rx <= 0 || ry <= 0) return false;
        double du = (u - cx) / rx, dv = (v - cy) / ry;
        return du * du + dv * dv <= 1.0;
    }
};

struct RectPrim {
    double cx, cy, hw, hh;
    bool contains(double u, double v) const {
        return hw > 0 && hh > 0 && std::fabs(u - cx) <= hw && std::fabs(v - cy) <= hh;
    }
};

// Posed primitive set. Yaw compresses the face horizontally and slides
// features toward the near edge; beyond-edge features are occluded by the
// face-ellipse clip. Pitch shifts features vertically and flattens the face.
struct PosedFace {
    EllipseP face, hair_shell, eye_l, eye_r, nose;
    RectPrim brow_l, brow_r, mouth;

    PosedFace(const FaceParams& p) {
        double a = p.yaw_deg * kPi / 180.0, b = p.pitch_deg * kPi / 180.0;
        double ca = std::cos(a), sa = std::sin(a);
        double cb = std::cos(b), sb = std::sin(b);
        double rx = p.face_rx * (0.5 + 0.5 * std::fabs(ca));
        double ry = p.face_ry * (0.85 + 0.15 * std::fabs(cb));
        double cx = kFaceCx + 0.15 * p.face_rx * sa;
        double cy = kFaceCy + 0.05 * p.face_ry * sb;
        face = {cx, cy, rx, ry};
        hair_shell = {cx, cy, rx, ry + p.hair_h};
        auto fx = [&](double dx) { return cx + dx * ca - 0.35 * rx * sa; };
        auto fy = [&](double dy) { return cy + (dy - kFaceCy) * cb + 0.18 * ry * sb + (kFaceCy - cy); };
        double frx = std::max(0.0, p.eye_rx * ca);
        eye_l = {fx(-p.eye_dx), fy(p.eye_y), frx, p.eye_ry};
        eye_r = {fx(p.eye_dx), fy(p.eye_y), frx, p.eye_ry};
        brow_l = {fx(-p.eye_dx), fy(p.eye_y - p.brow_gap), std::max(0.0, p.brow_hw * ca), p.brow_hh};
        brow_r = {fx(p.eye_dx), fy(p.eye_y - p.brow_gap), std::max(0.0, p.brow_hw * ca), p.brow_hh};
        nose = {fx(0.0), fy(p.nose_y), std::max(0.0, p.nose_hw * ca), p.nose_hh};
        mouth = {fx(0.0), fy(p.mouth_y), std::max(0.0, p.mouth_hw * ca), p.mouth_hh};
    }
};

}  // namespace

RegionGrids region_grids(const FaceParams& p, int size) {
    PosedFace pf(p);
    RegionGrids g;
    g.size = size;
    long n = (long)size * size;
    g.face.assign(n, 0);
    g.keypoints.assign(n, 0);
    g.hair.assign(n, 0);
    for (int i = 0; i < size; ++i) {
        double v = (i + 0.5) / size;
        for (int j = 0; j < size; ++j) {
            double u = (j + 0.5) / size;
            long idx = (long)i * size + j;
            bool in_face = pf.face.contains(u, v);
            if (in_face) {
                g.face[idx] = 1;
                bool kp = pf.eye_l.contains(u, v) || pf.eye_r.contains(u, v) ||
                          pf.brow_l.contains(u, v) || pf.brow_r.contains(u, v) ||
                          pf.nose.contains(u, v) || pf.mouth.contains(u, v);
                if (kp) g.keypoints[idx] = 1;
            } else if (v < pf.face.cy && pf.hair_shell.contains(u, v)) {
                g.hair[idx] = 1;
            }
        }
    }
    return g;
}

Tensor render(const FaceParams& p, int size, int channels) {
    if (channels != 1 && channels != 3)
        throw Error(ErrorKind::Invalid, "render: channels must be 1 or 3");
    PosedFace pf(p);
    Tensor img = Tensor::full({channels, size, size}, -1.0);
    for (int i = 0; i < size; ++i) {
        double v = (i + 0.5) / size;
        for (int j = 0; j < size; ++j) {
            double u = (j + 0.5) / size;
            const double* a = nullptr;
            if (pf.face.contains(u, v)) {
                a = p.skin_a;
                if (pf.mouth.contains(u, v)) a = p.mouth_a;
                if (pf.nose.contains(u, v)) a = p.nose_a;
                if (pf.brow_l.contains(u, v) || pf.brow_r.contains(u, v)) a = p.brow_a;
                if (pf.eye_l.contains(u, v) || pf.eye_r.contains(u, v)) a = p.eye_a;
            } else if (v < pf.face.cy && pf.hair_shell.contains(u, v)) {
                a = p.hair_a;
            }
            if (a)
                for (int c = 0; c < channels; ++c) img[(long)c * size * size + (long)i * size + j] = a[c];
        }
    }
    if (p.gain != 1.0) {
        for (auto& x : img.data) {
            double lum = (x + 1.0) * 0.5 * p.gain;
            x = 2.0 * std::clamp(lum, 0.0, 1.0) - 1.0;
        }
    }
    return img;
}

FaceParams sample_identity(uint64_t seed, int identity) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + (uint64_t)identity * 0xBF58476D1CE4E5B9ull + 1);
    auto U = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    FaceParams p;
    p.identity = identity;
    p.face_rx = U(0.26, 0.36);
    p.face_ry = U(0.32, 0.42);
    p.eye_dx = U(0.09, 0.15);
    p.eye_y = U(0.43, 0.50);
    p.eye_rx = U(0.030, 0.055);
    p.eye_ry = U(0.018, 0.034);
    p.brow_hw = U(0.040, 0.065);
    p.brow_hh = U(0.008, 0.016);
    p.brow_gap = U(0.045, 0.07);
    p.nose_hw = U(0.016, 0.034);
    p.nose_hh = U(0.035, 0.065);
    p.nose_y = U(0.55, 0.62);
    p.mouth_hw = U(0.05, 0.11);
    p.mouth_hh = U(0.012, 0.03);
    p.mouth_y = U(0.68, 0.76);
    p.hair_h = U(0.06, 0.12);
    double skin = U(0.1, 0.8), hair = U(-0.9, -0.2), eye = U(-1.0, -0.5);
    double brow = U(-0.8, -0.3), nose = U(-0.2, 0.5), mouth = U(-0.7, 0.0);
    for (int c = 0; c < 3; ++c) {
        double tint = 1.0 + 0.12 * (c - 1);
        p.skin_a[c] = std::clamp(skin * tint, -1.0, 1.0);
        p.hair_a[c] = std::clamp(hair * tint, -1.0, 1.0);
        p.eye_a[c] = std::clamp(eye * tint, -1.0, 1.0);
        p.brow_a[c] = std::clamp(brow * tint, -1.0, 1.0);
        p.nose_a[c] = std::clamp(nose * tint, -1.0, 1.0);
        p.mouth_a[c] = std::clamp(mouth * tint, -1.0, 1.0);
    }
    return p;
}

std::vector<size_t> Dataset::train_indices() const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].identity < n_train_identities) idx.push_back(i);
    return idx;
}

std::vector<size_t> Dataset::test_indices() const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].identity >= n_train_identities) idx.push_back(i);
    return idx;
}

Dataset make_dataset(int n_identities, const std::vector<double>& yaws,
                     const std::vector<double>& pitches, uint64_t seed, int image_size, int channels) {
    if (n_identities < 2) throw Error(ErrorKind::Invalid, "need at least 2 identities");
    Dataset ds;
    ds.n_identities = n_identities;
    ds.n_train_identities = std::max(1, (int)(n_identities * 5 / 8));
    ds.yaws = yaws;
    ds.pitches = pitches.empty() ? default_pitches() : pitches;
    ds.image_size = image_size;
    ds.channels = channels;
    ds.seed = seed;
    std::mt19937_64 gain_rng(seed ^ 0xA5A5A5A55A5A5A5Aull);
    for (int id = 0; id < n_identities; ++id) {
        FaceParams base = sample_identity(seed, id);
        ds.identities.push_back(base);
        Tensor frontal = render(base, image_size, channels);
        for (double pitch : ds.pitches)
            for (double yaw : ds.yaws) {
                FaceParams posed = base;
                posed.yaw_deg = yaw;
                posed.pitch_deg = pitch;
                posed.gain = std::uniform_real_distribution<double>(0.7, 1.3)(gain_rng);
                ImagePair pair;
                pair.profile = render(posed, image_size, channels);
                pair.frontal = frontal;
                pair.identity = id;
                pair.yaw_deg = yaw;
                pair.pitch_deg = pitch;
                ds.pairs.push_back(std::move(pair));
            }
    }
    return ds;
}

}  // namespace dagan
