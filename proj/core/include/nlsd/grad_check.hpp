#pragma once

#include <functional>
#include <vector>

#include "nlsd/tensor.hpp"

namespace nlsd {

struct GradCheckResult {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  long long compared = 0;

  bool ok(double rel_tol) const { return compared > 0 && max_rel_error <= rel_tol; }
};

// Central-difference check of analytic gradients. loss_fn must be a pure
// function of the parameter values; it is re-evaluated 2*N times for N total
// parameter components. Relative error uses max(|analytic|, |numeric|) as the
// denominator and counts near-zero pairs as exact.
GradCheckResult finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& loss_fn, std::vector<Tensor> params,
    const std::vector<Tensor>& analytic_grads, double step = 1e-5);

}  // namespace nlsd
