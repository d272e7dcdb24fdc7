#include "dagan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dagan {

namespace {
unsigned char to_byte(double v) {
    double scaled = (v + 1.0) * 0.5 * 255.0;
    return (unsigned char)std::lround(std::clamp(scaled, 0.0, 255.0));
}
}  // namespace

void write_image(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
        throw Error(ErrorKind::Invalid, "write_image: expected [1|3,H,W], got " + shape_str(image.shape));
    int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write image '" + path + "'");
    os << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(w * c);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j)
            for (int ch = 0; ch < c; ++ch)
                row[j * c + ch] = to_byte(image[((long)ch * h + i) * w + j]);
        os.write(reinterpret_cast<const char*>(row.data()), (std::streamsize)row.size());
    }
    if (!os) throw Error(ErrorKind::Io, "write failure on '" + path + "'");
}

void write_mask(const std::string& path, const Tensor& mask) {
    if (mask.rank() != 2)
        throw Error(ErrorKind::Invalid, "write_mask: expected [H,W], got " + shape_str(mask.shape));
    int h = mask.dim(0), w = mask.dim(1);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write mask '" + path + "'");
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) row[j] = mask[(long)i * w + j] > 0.5 ? 255 : 0;
        os.write(reinterpret_cast<const char*>(row.data()), (std::streamsize)row.size());
    }
    if (!os) throw Error(ErrorKind::Io, "write failure on '" + path + "'");
}

Tensor read_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot read image '" + path + "'");
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    is >> magic >> w >> h >> maxv;
    if ((magic != "P5" && magic != "P6") || maxv != 255 || w <= 0 || h <= 0)
        throw Error(ErrorKind::Io, "'" + path + "' is not an 8-bit PGM/PPM");
    is.get();
    int c = magic == "P5" ? 1 : 3;
    std::vector<unsigned char> raw((size_t)w * h * c);
    is.read(reinterpret_cast<char*>(raw.data()), (std::streamsize)raw.size());
    if (!is) throw Error(ErrorKind::Io, "truncated image '" + path + "'");
    Tensor img = Tensor::zeros({c, h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int ch = 0; ch < c; ++ch)
                img[((long)ch * h + i) * w + j] = raw[((size_t)i * w + j) * c + ch] / 255.0 * 2.0 - 1.0;
    return img;
}

Tensor tile_grid(const std::vector<Tensor>& tiles, int rows, int cols) {
    if (tiles.empty() || rows * cols != (int)tiles.size())
        throw Error(ErrorKind::Invalid, "tile_grid: need rows*cols tiles");
    int c = tiles[0].dim(0), h = tiles[0].dim(1), w = tiles[0].dim(2);
    Tensor grid = Tensor::full({c, rows * h, cols * w}, -1.0);
    for (int r = 0; r < rows; ++r)
        for (int col = 0; col < cols; ++col) {
            const Tensor& t = tiles[r * cols + col];
            if (t.shape != tiles[0].shape)
                throw Error(ErrorKind::Invalid, "tile_grid: inconsistent tile shapes");
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j)
                        grid[((long)ch * rows * h + r * h + i) * cols * w + col * w + j] =
                            t[((long)ch * h + i) * w + j];
        }
    return grid;
}

}  // namespace dagan
