#ifndef DAGAN_TENSOR_HPP
#define DAGAN_TENSOR_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagan {

enum class ErrorKind { Invalid, Numeric, Io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s);

// Dense row-major n-d array of doubles.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if ((long)data.size() != numel(shape))
            throw Error(ErrorKind::Invalid, "tensor data size does not match shape " + shape_str(shape));
    }

    static Tensor zeros(const Shape& s) { return Tensor(s, std::vector<double>(numel(s), 0.0)); }
    static Tensor full(const Shape& s, double v) { return Tensor(s, std::vector<double>(numel(s), v)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    long size() const { return (long)data.size(); }
    int rank() const { return (int)shape.size(); }
    int dim(int i) const { return shape[i]; }

    double& operator[](long i) { return data[i]; }
    double operator[](long i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double max_abs() const;
};

Tensor randn(const Shape& s, std::mt19937_64& rng, double stddev = 1.0);
Tensor uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi);

// Plain (non-graph) utilities.
Tensor mean_pool2(const Tensor& x);             // [N,C,H,W] -> [N,C,H/2,W/2]
Tensor upsample_nearest2_raw(const Tensor& x);  // [N,C,H,W] -> [N,C,2H,2W]

}  // namespace dagan

#endif
