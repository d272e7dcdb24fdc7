#include "dagan/gradcheck.hpp"

#include <cmath>

namespace dagan {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor g = Tensor::zeros(x.shape);
    Tensor probe = x;
    for (long i = 0; i < x.size(); ++i) {
        probe.data[i] = x.data[i] + h;
        double fp = f(probe);
        probe.data[i] = x.data[i] - h;
        double fm = f(probe);
        probe.data[i] = x.data[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw Error(ErrorKind::Numeric, "finite_diff_grad: non-finite function evaluation");
        g.data[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double grad_rel_error(const Tensor& analytic, const Tensor& reference) {
    if (!analytic.same_shape(reference))
        throw Error(ErrorKind::Invalid, "grad_rel_error: shape mismatch");
    double diff = 0.0;
    for (long i = 0; i < analytic.size(); ++i)
        diff = std::max(diff, std::fabs(analytic[i] - reference[i]));
    return diff / std::max(1.0, reference.max_abs());
}

}  // namespace dagan
