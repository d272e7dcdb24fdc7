#include "dagan/tensor.hpp"

#include <cmath>
#include <sstream>

namespace dagan {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
}

Tensor randn(const Shape& s, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t = Tensor::zeros(s);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

Tensor uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t = Tensor::zeros(s);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

Tensor mean_pool2(const Tensor& x) {
    if (x.rank() != 4 || x.dim(2) % 2 || x.dim(3) % 2)
        throw Error(ErrorKind::Invalid, "mean_pool2 expects [N,C,H,W] with even H,W, got " + shape_str(x.shape));
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int Ho = H / 2, Wo = W / 2;
    Tensor y = Tensor::zeros({N, C, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double* src = &x.data[((long)n * C + c) * H * W];
            double* dst = &y.data[((long)n * C + c) * Ho * Wo];
            for (int i = 0; i < Ho; ++i)
                for (int j = 0; j < Wo; ++j) {
                    double s = src[(2 * i) * W + 2 * j] + src[(2 * i) * W + 2 * j + 1] +
                               src[(2 * i + 1) * W + 2 * j] + src[(2 * i + 1) * W + 2 * j + 1];
                    dst[i * Wo + j] = 0.25 * s;
                }
        }
    return y;
}

Tensor upsample_nearest2_raw(const Tensor& x) {
    if (x.rank() != 4)
        throw Error(ErrorKind::Invalid, "upsample expects [N,C,H,W], got " + shape_str(x.shape));
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y = Tensor::zeros({N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double* src = &x.data[((long)n * C + c) * H * W];
            double* dst = &y.data[((long)n * C + c) * 4 * H * W];
            for (int i = 0; i < 2 * H; ++i)
                for (int j = 0; j < 2 * W; ++j) dst[i * 2 * W + j] = src[(i / 2) * W + j / 2];
        }
    return y;
}

}  // namespace dagan
