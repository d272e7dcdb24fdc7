#ifndef DAGAN_SYNTHDATA_HPP
#define DAGAN_SYNTHDATA_HPP

#include <cstdint>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

// Geometry and albedo of one procedural face, in unit coordinates
// (u right, v down, face centered near (0.5, 0.55)). Same identity seed,
// same geometry and albedo.
struct FaceParams {
    int identity = 0;
    double face_rx = 0.32, face_ry = 0.38;
    double eye_dx = 0.12, eye_y = 0.47, eye_rx = 0.045, eye_ry = 0.03;
    double brow_hh = 0.012, brow_gap = 0.055, brow_hw = 0.055;
    double nose_hw = 0.025, nose_hh = 0.05, nose_y = 0.58;
    double mouth_hw = 0.08, mouth_hh = 0.02, mouth_y = 0.72;
    double hair_h = 0.09;
    // Albedo per region, 3 channels; grayscale uses channel 0.
    double skin_a[3], hair_a[3], eye_a[3], brow_a[3], nose_a[3], mouth_a[3];
    // Pose and illumination of a particular render.
    double yaw_deg = 0.0, pitch_deg = 0.0, gain = 1.0;
};

// Boolean occupancy grids of the rendered primitives at one pose. Rendering
// and the analytic parser both read these, so masks cover the rendered
// primitives exactly.
struct RegionGrids {
    int size = 0;
    std::vector<uint8_t> face, keypoints, hair;  // keypoints = eyes|brows|nose|mouth, clipped to face
};

RegionGrids region_grids(const FaceParams& p, int size);

// Deterministic raster, values in [-1,1], shape [channels, size, size].
// Yaw is simulated by horizontal foreshortening with feature occlusion,
// pitch by a vertical shift/compression; gain rescales brightness.
Tensor render(const FaceParams& p, int size, int channels);

FaceParams sample_identity(uint64_t seed, int identity);

struct ImagePair {
    Tensor profile;  // I^p at (yaw, pitch), illumination gain applied
    Tensor frontal;  // I^f at yaw=pitch=0, gain 1
    int identity = 0;
    double yaw_deg = 0.0, pitch_deg = 0.0;
};

struct Dataset {
    std::vector<ImagePair> pairs;
    std::vector<FaceParams> identities;  // frontal geometry per identity
    std::vector<double> yaws, pitches;
    int n_identities = 0;
    int n_train_identities = 0;  // identities [0, n_train) train, rest test
    int image_size = 32;
    int channels = 1;
    uint64_t seed = 0;

    std::vector<size_t> train_indices() const;
    std::vector<size_t> test_indices() const;
};

inline std::vector<double> default_yaws() {
    return {-90, -75, -60, -45, -30, -15, 0, 15, 30, 45, 60, 75, 90};
}
inline std::vector<double> default_pitches() { return {0}; }

Dataset make_dataset(int n_identities, const std::vector<double>& yaws,
                     const std::vector<double>& pitches, uint64_t seed, int image_size = 32,
                     int channels = 1);

}  // namespace dagan

#endif
