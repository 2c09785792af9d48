#include "nlsd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace nlsd {

void sgd_momentum_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                       OptimizerState& state, double lr, double momentum) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd: got " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const Tensor& p : params) state.velocity.emplace_back(p.shape, 0.0);
  }
  if (state.velocity.size() != params.size()) {
    throw std::invalid_argument("sgd: optimizer state does not match parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    Tensor& v = state.velocity[i];
    if (!p.same_shape(g) || !p.same_shape(v)) {
      throw std::invalid_argument("sgd: shape mismatch at parameter " + std::to_string(i) +
                                  ": param " + shape_str(p.shape) + " grad " + shape_str(g.shape));
    }
    for (std::size_t k = 0; k < p.data.size(); ++k) {
      v.data[k] = momentum * v.data[k] + lr * g.data[k];
      p.data[k] -= v.data[k];
    }
  }
}

double poly_decay(double base_lr, long long iter, long long max_iter, double power) {
  if (max_iter <= 0) throw std::invalid_argument("poly_decay: max_iter must be positive");
  if (iter < 0) throw std::invalid_argument("poly_decay: iter must be non-negative");
  if (iter >= max_iter) return 0.0;
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
  return base_lr * std::pow(frac, power);
}

}  // namespace nlsd
