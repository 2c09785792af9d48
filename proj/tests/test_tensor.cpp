#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nlsd/grad_check.hpp"
#include "nlsd/rng.hpp"
#include "nlsd/tensor.hpp"

using namespace nlsd;

TEST_CASE("tensor shape bookkeeping") {
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_numel({}) == 1);  // rank-0 scalar
  CHECK(shape_str({2, 3}) == "[2,3]");

  const Tensor t({2, 2}, 1.5);
  CHECK(t.numel() == 4);
  CHECK(t.data[3] == 1.5);

  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({-1, 3}), std::invalid_argument);
  CHECK(Tensor({0, 3}).numel() == 0);  // zero dims give a legal empty tensor

  const Tensor s = Tensor::scalar(4.0);
  CHECK(s.shape == std::vector<int>{1});
  CHECK(s.numel() == 1);

  Tensor inf({1}, std::vector<double>{1.0});
  CHECK(inf.all_finite());
  inf.data[0] = INFINITY;
  CHECK_FALSE(inf.all_finite());
}

TEST_CASE("truncated cross-entropy value and gradient") {
  // -ln(1/2) for a confident-at-half prediction of a positive pixel.
  CHECK(detail::truncated_cross_entropy(1.0, 0.5) == doctest::Approx(0.6931471805599453));
  // y = 0.5 against y_hat = 0.5 is the entropy of a fair coin.
  CHECK(detail::truncated_cross_entropy(0.5, 0.5) == doctest::Approx(0.6931471805599453));
  // -ln(1/16) = 4 ln 2.
  CHECK(detail::truncated_cross_entropy(1.0, 0.0625) == doctest::Approx(2.772588722239781));

  // Gradient (y_hat - y) / (y_hat (1 - y_hat)) inside the open interval.
  const double g = detail::truncated_cross_entropy_grad(1.0, 0.25);
  CHECK(g == doctest::Approx((0.25 - 1.0) / (0.25 * 0.75)));

  // Outside [0,1] the prediction is truncated: value saturates, gradient dies.
  CHECK(detail::truncated_cross_entropy(1.0, 1.5) ==
        detail::truncated_cross_entropy(1.0, 1.0));
  CHECK(detail::truncated_cross_entropy_grad(1.0, 1.5) == 0.0);
  CHECK(detail::truncated_cross_entropy_grad(0.0, -0.3) == 0.0);
  CHECK(detail::truncated_cross_entropy_grad(1.0, 1.0) == 0.0);  // clamp active at the edge
}

TEST_CASE("conv2d forward matches hand-counted values") {
  // 1x3x3 input of 1..9, 1x1x2x2 kernel of ones, valid padding: each output
  // is the sum of a 2x2 patch.
  Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 2, 2}, {1, 1, 1, 1});
  const Tensor out = conv2d_forward(x, k, Conv2dSpec{1, 1, 0});
  CHECK(out.shape == std::vector<int>{1, 2, 2});
  CHECK(out.data[0] == 12.0);  // 1+2+4+5
  CHECK(out.data[3] == 28.0);  // 5+6+8+9

  // Same padding with a 3x3 ones kernel: center output sums all nine.
  Tensor k3({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  const Tensor same = conv2d_forward(x, k3, Conv2dSpec{1, 1, 1});
  CHECK(same.shape == std::vector<int>{1, 3, 3});
  CHECK(same.data[4] == 45.0);
  CHECK(same.data[0] == 12.0);  // corner sees the 2x2 patch only

  // Dilation 2 with k=3 needs 2 pixels of padding for same size.
  const Tensor dil = conv2d_forward(x, k3, Conv2dSpec{1, 2, 2});
  CHECK(dil.shape == std::vector<int>{1, 3, 3});
  // At dilation 2 every off-center tap of the center output lands outside
  // the 3x3 input, leaving just the middle value.
  CHECK(dil.data[4] == 5.0);

  // Stride 2 halves the output grid.
  Tensor x4({1, 4, 4}, std::vector<double>(16, 1.0));
  const Tensor strided = conv2d_forward(x4, k, Conv2dSpec{2, 1, 0});
  CHECK(strided.shape == std::vector<int>{1, 2, 2});
  CHECK(strided.data[0] == 4.0);

  CHECK_THROWS_AS(conv2d_forward(Tensor({2, 3, 3}), k, Conv2dSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(conv2d_forward(x, k3, Conv2dSpec{1, 1, -1}), std::invalid_argument);
}

TEST_CASE("elementwise forward kernels") {
  Tensor x({1, 1, 4}, {-1.0, 0.0, 0.5, 2.0});
  const Tensor r = relu_forward(x);
  CHECK(r.data == std::vector<double>{0.0, 0.0, 0.5, 2.0});

  const Tensor s = sigmoid_forward(Tensor({2}, {0.0, 1.0}));
  CHECK(s.data[0] == doctest::Approx(0.5));
  CHECK(s.data[1] == doctest::Approx(0.7310585786300049));

  // Stable at large magnitude: no overflow, saturates cleanly.
  const Tensor sat = sigmoid_forward(Tensor({2}, {-1000.0, 1000.0}));
  CHECK(sat.data[0] == doctest::Approx(0.0));
  CHECK(sat.data[1] == doctest::Approx(1.0));

  Tensor img({2, 2, 2}, std::vector<double>(8, 1.0));
  Tensor bias({2}, {10.0, -10.0});
  const Tensor biased = bias_add_forward(img, bias);
  CHECK(biased.data[0] == 11.0);
  CHECK(biased.data[7] == -9.0);
  CHECK_THROWS_AS(bias_add_forward(img, Tensor({3})), std::invalid_argument);
}

TEST_CASE("backward on elementwise chain reproduces hand result") {
  // loss = sum(x * x) has gradient 2x.
  Graph g;
  const int x = g.leaf(Tensor({3}, {1.0, -2.0, 3.0}, true));
  const int loss = g.sum(g.mul(x, x));
  g.backward(loss);
  CHECK(g.grad(x).data == std::vector<double>{2.0, -4.0, 6.0});

  // backward twice gives the same gradients (buffers are reset each call).
  g.backward(loss);
  CHECK(g.grad(x).data == std::vector<double>{2.0, -4.0, 6.0});
}

TEST_CASE("backward covers add, scale and shared subexpressions") {
  // loss = sum(3*(a+b) * a): d/da = 3*(2a+b), d/db = 3a.
  Graph g;
  const int a = g.leaf(Tensor({2}, {1.0, 2.0}, true));
  const int b = g.leaf(Tensor({2}, {5.0, -1.0}, true));
  const int loss = g.sum(g.mul(g.scale(g.add(a, b), 3.0), a));
  g.backward(loss);
  CHECK(g.grad(a).data[0] == doctest::Approx(3.0 * (2.0 * 1.0 + 5.0)));
  CHECK(g.grad(a).data[1] == doctest::Approx(3.0 * (2.0 * 2.0 - 1.0)));
  CHECK(g.grad(b).data[0] == doctest::Approx(3.0));
  CHECK(g.grad(b).data[1] == doctest::Approx(6.0));

  // Non-requires-grad leaves get no gradient buffer.
  Graph g2;
  const int c = g2.leaf(Tensor({2}, {1.0, 1.0}, false));
  const int d = g2.leaf(Tensor({2}, {2.0, 2.0}, true));
  const int l2 = g2.sum(g2.mul(c, d));
  g2.backward(l2);
  CHECK(g2.grad(c).data.empty());
  CHECK(g2.grad(d).data == std::vector<double>{1.0, 1.0});
}

TEST_CASE("backward rejects non-scalar roots and bad graphs") {
  Graph g;
  const int x = g.leaf(Tensor({2}, {1.0, 2.0}, true));
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
  const int mismatched = g.leaf(Tensor({3}));
  CHECK_THROWS_AS(g.add(x, mismatched), std::invalid_argument);
  CHECK_THROWS_AS((void)g.value(99), std::invalid_argument);
}

TEST_CASE("bce_sum matches the scalar kernel and differentiates") {
  Graph g;
  const int pred = g.leaf(Tensor({2}, {0.5, 0.25}, true));
  Tensor target({2}, {1.0, 0.0});
  const int loss = g.bce_sum(pred, target);
  const double expected = detail::truncated_cross_entropy(1.0, 0.5) +
                          detail::truncated_cross_entropy(0.0, 0.25);
  CHECK(g.value(loss).data[0] == doctest::Approx(expected));
  g.backward(loss);
  CHECK(g.grad(pred).data[0] == doctest::Approx(detail::truncated_cross_entropy_grad(1.0, 0.5)));
  CHECK(g.grad(pred).data[1] ==
        doctest::Approx(detail::truncated_cross_entropy_grad(0.0, 0.25)));

  CHECK_THROWS_AS(g.bce_sum(pred, Tensor({2}, {1.5, 0.0})), std::invalid_argument);
  CHECK_THROWS_AS(g.bce_sum(pred, Tensor({3})), std::invalid_argument);
}

TEST_CASE("finite differences agree with the tape on a small conv net") {
  StreamRng rng(derive_stream(3, {fnv1a("tensor-test")}));
  Tensor x({2, 5, 5});
  for (double& v : x.data) v = rng.next_double();
  Tensor w1({3, 2, 3, 3}, 0.0, true);
  for (double& v : w1.data) v = 0.4 * (rng.next_double() - 0.5);
  Tensor b1({3}, 0.0, true);
  Tensor w2({1, 3, 3, 3}, 0.0, true);
  for (double& v : w2.data) v = 0.4 * (rng.next_double() - 0.5);
  Tensor target({1, 5, 5});
  for (double& v : target.data) v = rng.next_double();

  // Leaves are created in statement order so parameter node ids are stable.
  auto build = [&](Graph& g, const std::vector<Tensor>& p, std::vector<int>& param_ids) {
    const int xi = g.leaf(x);
    const int w1i = g.leaf(p[0]);
    const int b1i = g.leaf(p[1]);
    const int w2i = g.leaf(p[2]);
    param_ids = {w1i, b1i, w2i};
    const int c1 = g.bias_add(g.conv2d(xi, w1i, 1, 1, 1), b1i);
    const int c2 = g.conv2d(g.relu(c1), w2i, 1, 2, 2);
    return g.bce_sum(g.sigmoid(c2), target);
  };

  std::vector<Tensor> params = {w1, b1, w2};
  Graph g;
  std::vector<int> ids;
  const int loss = build(g, params, ids);
  g.backward(loss);
  std::vector<Tensor> grads;
  for (int id : ids) grads.push_back(g.grad(id));

  const GradCheckResult res = finite_difference_check(
      [&](const std::vector<Tensor>& p) {
        Graph fresh;
        std::vector<int> scratch;
        return fresh.value(build(fresh, p, scratch)).data[0];
      },
      params, grads, 1e-5);
  CHECK(res.compared == 84);
  CHECK(res.max_rel_error < 1e-6);
}
