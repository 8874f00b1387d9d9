#pragma once

#include <functional>

#include "amde/tensor.hpp"

namespace amde {

// Scalar-valued function of one tensor; everything else it reads must be
// constant across calls.
using TensorFn = std::function<Tensor(const Tensor&)>;

// Compares the tape gradient of f at x against central finite differences,
// coordinate by coordinate, and returns
//   max_i |analytic_i - cd_i| / max(|analytic_i|, |cd_i|, 1e-8).
// f is evaluated twice up front; bitwise disagreement raises a determinism
// error. eps must lie in (0, 1e-2].
double grad_check(const TensorFn& f, const Tensor& x, double eps);

}  // namespace amde
