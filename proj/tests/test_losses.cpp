#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nlsd/losses.hpp"

using namespace nlsd;

TEST_CASE("cross entropy values on hand-computed points") {
  CHECK(cross_entropy(1.0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy(0.0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy(1.0, 0.0625) == doctest::Approx(4.0 * std::log(2.0)));
  // Soft target at its own value gives the binary entropy of that value.
  const double h = -(0.3 * std::log(0.3) + 0.7 * std::log(0.7));
  CHECK(cross_entropy(0.3, 0.3) == doctest::Approx(h));
  // Truncation: predictions beyond [0,1] score like the boundary, and the
  // clamp keeps the boundary itself finite.
  CHECK(cross_entropy(1.0, 1.7) == doctest::Approx(cross_entropy(1.0, 1.0)));
  CHECK(cross_entropy(0.0, -0.4) == doctest::Approx(cross_entropy(0.0, 0.0)));
  CHECK(std::isfinite(cross_entropy(1.0, 0.0)));
  CHECK(cross_entropy(1.0, 0.0) == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("prediction loss sums images, labellers and pixels") {
  // One image, 1x2 pixels, two labellers, zero noise: the loss is the plain
  // cross-entropy sum over all four (label, prediction) pairs.
  SaliencyMap pred(1, 2);
  pred.at(0, 0) = 0.5;
  pred.at(0, 1) = 0.25;
  std::map<std::string, SaliencyMap> preds{{"im", pred}};

  SaliencyMap l0(1, 2);
  l0.at(0, 0) = 1.0;
  l0.at(0, 1) = 0.0;
  SaliencyMap l1(1, 2);
  l1.at(0, 0) = 0.0;
  l1.at(0, 1) = 1.0;
  std::map<std::string, std::vector<SaliencyMap>> labels{{"im", {l0, l1}}};

  std::map<std::string, std::vector<NoiseMap>> zero_noise{
      {"im", {NoiseMap(1, 2, 0.0), NoiseMap(1, 2, 0.0)}}};

  const double expected = cross_entropy(1.0, 0.5) + cross_entropy(0.0, 0.25) +
                          cross_entropy(0.0, 0.5) + cross_entropy(1.0, 0.25);
  CHECK(prediction_loss(preds, zero_noise, labels) == doctest::Approx(expected));

  // Noise shifts the prediction before truncation: +0.25 moves y_hat to
  // 0.75/0.5, and a large positive shift pins the pair at the boundary.
  std::map<std::string, std::vector<NoiseMap>> noise{
      {"im", {NoiseMap(1, 2, 0.25), NoiseMap(1, 2, 10.0)}}};
  const double shifted = cross_entropy(1.0, 0.75) + cross_entropy(0.0, 0.5) +
                         cross_entropy(0.0, 1.0) + cross_entropy(1.0, 1.0);
  CHECK(prediction_loss(preds, noise, labels) == doctest::Approx(shifted));
}

TEST_CASE("total loss is the weighted sum of its parts") {
  const LossBreakdown lb = total_loss(2.0, 3.0, 0.5);
  CHECK(lb.prediction_loss == 2.0);
  CHECK(lb.noise_loss == 3.0);
  CHECK(lb.lambda == 0.5);
  CHECK(lb.total == doctest::Approx(3.5));

  // Lambda zero reduces the total to the prediction term.
  CHECK(total_loss(2.0, 100.0, 0.0).total == doctest::Approx(2.0));
}
