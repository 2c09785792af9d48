#include "nlsd/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace nlsd {

GradCheckResult finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& loss_fn, std::vector<Tensor> params,
    const std::vector<Tensor>& analytic_grads, double step) {
  if (params.size() != analytic_grads.size()) {
    throw std::invalid_argument("grad_check: parameter/gradient count mismatch");
  }
  GradCheckResult res;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].same_shape(analytic_grads[p])) {
      throw std::invalid_argument("grad_check: shape mismatch at parameter " + std::to_string(p));
    }
    for (std::size_t i = 0; i < params[p].data.size(); ++i) {
      const double orig = params[p].data[i];
      params[p].data[i] = orig + step;
      const double f_plus = loss_fn(params);
      params[p].data[i] = orig - step;
      const double f_minus = loss_fn(params);
      params[p].data[i] = orig;

      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double analytic = analytic_grads[p].data[i];
      const double abs_err = std::fabs(analytic - numeric);
      const double denom = std::max(std::fabs(analytic), std::fabs(numeric));
      const double rel_err = denom < 1e-10 ? 0.0 : abs_err / denom;
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, rel_err);
      ++res.compared;
    }
  }
  return res;
}

}  // namespace nlsd
