#ifndef DAGAN_IMAGE_IO_HPP
#define DAGAN_IMAGE_IO_HPP

#include <string>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

// Lossless binary PGM/PPM. Images are [C,H,W] in [-1,1]; C=1 writes PGM,
// C=3 writes PPM. Masks write as 0/255 PGM.
void write_image(const std::string& path, const Tensor& image);
void write_mask(const std::string& path, const Tensor& mask);  // [H,W] in [0,1]
Tensor read_image(const std::string& path);                    // -> [C,H,W] in [-1,1]

// Tiles [C,H,W] images into a rows x cols grid (row-major tile order).
Tensor tile_grid(const std::vector<Tensor>& tiles, int rows, int cols);

}  // namespace dagan

#endif
