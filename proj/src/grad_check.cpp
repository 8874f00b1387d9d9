#include "amde/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "amde/error.hpp"

namespace amde {

double grad_check(const TensorFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2))
    throw Error(ErrorKind::Contract, "grad_check: eps must lie in (0, 1e-2]");

  auto eval = [&f](const Tensor& point) {
    Tensor y = f(point);
    if (!y.defined() || y.size() != 1)
      throw Error(ErrorKind::Contract, "grad_check: f must be scalar-valued");
    return y.item();
  };

  // Determinism probe: a stochastic f would corrupt the finite differences.
  {
    const Tensor probe = x.clone(false);
    const double y1 = eval(probe);
    const double y2 = eval(probe);
    if (!(y1 == y2))
      throw Error(ErrorKind::Determinism, "grad_check: two evaluations of f disagree");
  }

  // Analytic gradient through the tape.
  Tensor var = x.clone(true);
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f(var);
    if (!y.defined() || y.size() != 1)
      throw Error(ErrorKind::Contract, "grad_check: f must be scalar-valued");
    tape.backward(y);
    if (var.has_grad()) {
      analytic.assign(var.grad().begin(), var.grad().end());
    } else {
      analytic.assign(var.size(), 0.0);  // f ignored x entirely
    }
  }

  double worst = 0.0;
  Tensor point = x.clone(false);
  auto values = point.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double fp = eval(point);
    values[i] = saved - eps;
    const double fm = eval(point);
    values[i] = saved;
    const double cd = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(cd), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - cd) / denom);
  }
  return worst;
}

}  // namespace amde
