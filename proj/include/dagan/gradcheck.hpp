#ifndef DAGAN_GRADCHECK_HPP
#define DAGAN_GRADCHECK_HPP

#include <functional>

#include "dagan/tensor.hpp"

namespace dagan {

// Central-difference gradient of a scalar function, the ground truth for all
// gradient checks. 64-bit only.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

// max|a-b| / max(1, max|b|), with b the finite-difference reference.
double grad_rel_error(const Tensor& analytic, const Tensor& reference);

}  // namespace dagan

#endif
