#include "dagan/faceparse.hpp"

namespace dagan {

RegionMasks parse(const FaceParams& frontal_params, int image_size) {
    FaceParams p = frontal_params;
    p.yaw_deg = 0.0;
    p.pitch_deg = 0.0;
    RegionGrids g = region_grids(p, image_size);
    RegionMasks m;
    m.skin = Tensor::zeros({image_size, image_size});
    m.keypoints = Tensor::zeros({image_size, image_size});
    m.hair = Tensor::zeros({image_size, image_size});
    for (long i = 0; i < (long)image_size * image_size; ++i) {
        m.keypoints[i] = g.keypoints[i] ? 1.0 : 0.0;
        m.skin[i] = (g.face[i] && !g.keypoints[i]) ? 1.0 : 0.0;
        m.hair[i] = g.hair[i] ? 1.0 : 0.0;
    }
    return m;
}

Tensor batch_mask(const std::vector<const RegionMasks*>& masks, int channels,
                  Tensor RegionMasks::* region) {
    if (masks.empty()) throw Error(ErrorKind::Invalid, "batch_mask: empty batch");
    int H = ((*masks[0]).*region).dim(0), W = ((*masks[0]).*region).dim(1);
    Tensor out = Tensor::zeros({(int)masks.size(), channels, H, W});
    long hw = (long)H * W;
    for (size_t n = 0; n < masks.size(); ++n) {
        const Tensor& m = (*masks[n]).*region;
        if (m.dim(0) != H || m.dim(1) != W)
            throw Error(ErrorKind::Invalid, "batch_mask: inconsistent mask shapes");
        for (int c = 0; c < channels; ++c)
            std::copy(m.data.begin(), m.data.end(), out.data.begin() + ((long)n * channels + c) * hw);
    }
    return out;
}

RegionalImageVars apply_masks(Var image, const Tensor& skin_mask, const Tensor& keypoint_mask,
                              const Tensor& hair_mask) {
    const Tensor& img = image->value;
    if (!img.same_shape(skin_mask) || !img.same_shape(keypoint_mask) || !img.same_shape(hair_mask))
        throw Error(ErrorKind::Invalid, "apply_masks: mask shape " + shape_str(skin_mask.shape) +
                                            " does not match image " + shape_str(img.shape));
    RegionalImageVars out;
    out.skin = mul(image, constant(skin_mask));
    out.keypoints = mul(image, constant(keypoint_mask));
    out.hair = mul(image, constant(hair_mask));
    return out;
}

}  // namespace dagan
