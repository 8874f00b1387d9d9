#pragma once

#include <string>
#include <vector>

namespace amde {

struct GradSuiteEntry {
  std::string op;
  int cases = 0;
  double max_rel_err = 0.0;
  double tolerance = 1e-4;
  bool pass() const { return max_rel_err < tolerance; }
};

// Finite-difference sweep (eps 1e-5) over every differentiable operation with
// cases_per_op random shapes/seeds each, plus the joint loss through a small
// end-to-end network, checked parameter tensor by parameter tensor.
std::vector<GradSuiteEntry> run_gradient_suite(int cases_per_op);

bool gradient_suite_passed(const std::vector<GradSuiteEntry>& entries);

}  // namespace amde
