#pragma once

#include <vector>

#include "nlsd/tensor.hpp"

namespace nlsd {

// Heavy-ball SGD: v <- momentum*v + lr*grad; theta <- theta - v.
struct OptimizerState {
  std::vector<Tensor> velocity;

  // Velocity buffers are created lazily on the first step so the state can be
  // default-constructed before the parameter shapes are known.
  void reset() { velocity.clear(); }
};

void sgd_momentum_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                       OptimizerState& state, double lr, double momentum);

// Polynomial decay: base_lr * (1 - iter/max_iter)^power, clamped at 0 once
// iter reaches max_iter.
double poly_decay(double base_lr, long long iter, long long max_iter, double power);

}  // namespace nlsd
