#include <doctest.h>

#include <vector>

#include "nlsd/optim.hpp"

using namespace nlsd;

TEST_CASE("sgd momentum matches the hand-run recurrence") {
  // v <- m*v + lr*g, theta <- theta - v, from theta=1, g=1, lr=0.1, m=0.9:
  // step 1: v=0.1, theta=0.9; step 2: v=0.19, theta=0.71.
  std::vector<Tensor> params = {Tensor({1}, std::vector<double>{1.0}, true)};
  std::vector<Tensor> grads = {Tensor({1}, std::vector<double>{1.0})};
  OptimizerState state;

  sgd_momentum_step(params, grads, state, 0.1, 0.9);
  CHECK(params[0].data[0] == doctest::Approx(0.9));
  CHECK(state.velocity[0].data[0] == doctest::Approx(0.1));

  sgd_momentum_step(params, grads, state, 0.1, 0.9);
  CHECK(params[0].data[0] == doctest::Approx(0.71));
  CHECK(state.velocity[0].data[0] == doctest::Approx(0.19));

  // Zero momentum reduces to plain gradient descent.
  std::vector<Tensor> plain = {Tensor({1}, std::vector<double>{1.0}, true)};
  OptimizerState s2;
  sgd_momentum_step(plain, grads, s2, 0.5, 0.0);
  CHECK(plain[0].data[0] == doctest::Approx(0.5));
}

TEST_CASE("optimizer state resets and lazily allocates") {
  std::vector<Tensor> params = {Tensor({2}, {1.0, 2.0}, true),
                                Tensor({3}, {0.0, 0.0, 0.0}, true)};
  std::vector<Tensor> grads = {Tensor({2}, {1.0, -1.0}), Tensor({3}, {0.5, 0.5, 0.5})};
  OptimizerState state;
  CHECK(state.velocity.empty());

  sgd_momentum_step(params, grads, state, 0.1, 0.9);
  REQUIRE(state.velocity.size() == 2);
  CHECK(state.velocity[1].shape == std::vector<int>{3});

  state.reset();
  CHECK(state.velocity.empty());

  // After a reset the next step behaves like the first (no stale momentum).
  std::vector<Tensor> p2 = {Tensor({1}, std::vector<double>{0.0}, true)};
  std::vector<Tensor> g2 = {Tensor({1}, std::vector<double>{1.0})};
  OptimizerState s3;
  sgd_momentum_step(p2, g2, s3, 0.1, 0.9);
  s3.reset();
  sgd_momentum_step(p2, g2, s3, 0.1, 0.9);
  CHECK(p2[0].data[0] == doctest::Approx(-0.2));  // two fresh 0.1 steps
}

TEST_CASE("poly decay schedule") {
  // (1 - 1/2)^0.9 * 1e-3 at the halfway iteration.
  CHECK(poly_decay(1e-3, 50, 100, 0.9) == doctest::Approx(5.358867e-4).epsilon(1e-6));
  CHECK(poly_decay(1e-3, 0, 100, 0.9) == doctest::Approx(1e-3));
  CHECK(poly_decay(1e-3, 100, 100, 0.9) == 0.0);
  CHECK(poly_decay(1e-3, 250, 100, 0.9) == 0.0);  // clamped past the horizon
  // Power 1 is linear decay.
  CHECK(poly_decay(2.0, 25, 100, 1.0) == doctest::Approx(1.5));
}
