#ifndef DAGAN_FACEPARSE_HPP
#define DAGAN_FACEPARSE_HPP

#include "dagan/graph.hpp"
#include "dagan/synthdata.hpp"

namespace dagan {

// Binary region masks over the frontal image: skin (face minus keypoints),
// keypoints (eyes, brows, nose, mouth), hairline. Pairwise disjoint for the
// analytic parser.
struct RegionMasks {
    Tensor skin, keypoints, hair;  // [H,W], values in {0,1}
};

// Analytic stand-in for a learned face parser: masks are derived from the
// known generative geometry of the frontal face.
RegionMasks parse(const FaceParams& frontal_params, int image_size);

// Tiles per-sample [H,W] masks to [N,C,H,W] alongside an image batch.
Tensor batch_mask(const std::vector<const RegionMasks*>& masks, int channels,
                  Tensor RegionMasks::* region);

struct RegionalImageVars {
    Var skin, keypoints, hair;
};

// (I (.) M_s, I (.) M_k, I (.) M_h). Masks enter as constants, so gradient
// flows through the image only.
RegionalImageVars apply_masks(Var image, const Tensor& skin_mask, const Tensor& keypoint_mask,
                              const Tensor& hair_mask);

}  // namespace dagan

#endif
