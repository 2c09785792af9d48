#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nlsd/image.hpp"

namespace nlsd {

// Additive noise drawn for one (image, labeller) pair; values are signed.
using NoiseMap = SaliencyMap;

// Per-pixel Gaussian variances for one image.
struct VarianceMap {
  std::string image_id;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // sigma^2 per pixel, >= 0 and finite

  VarianceMap() = default;
  VarianceMap(std::string image_id, int height, int width, double fill = 0.0);

  long long pixels() const { return static_cast<long long>(height) * width; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }

  void validate() const;  // throws if an entry is negative or non-finite
};

// Same layout as VarianceMap, separate type so model variances and label
// statistics cannot be swapped silently.
struct EmpiricalVariance {
  std::string image_id;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  EmpiricalVariance() = default;
  EmpiricalVariance(std::string image_id, int height, int width, double fill = 0.0);

  long long pixels() const { return static_cast<long long>(height) * width; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
};

// The full noise state: one variance field per training image. Round 1
// starts with every entry exactly zero, so the first round trains on the raw
// labels.
struct NoiseBank {
  std::map<std::string, VarianceMap> variances;
  int round = 1;
};

struct GaussianSpec {
  double mean = 0.0;
  double stddev = 1.0;
};

// Below this, a variance is treated as degenerate: the KL reduction skips
// pixels where both sides are under the floor and clamps a lone small side
// up to it, keeping the log term finite.
inline constexpr double kVarianceFloor = 1e-6;

// Per-pixel draw from N(0, sigma^2). The stream is a pure function of
// (seed, image id, labeller, round, epoch), so any single map can be
// regenerated without replaying the run.
NoiseMap sample_noise(const VarianceMap& variance, int labeller_index, int round, int epoch,
                      std::uint64_t seed);

// Maximum-likelihood variance of the labels around the prediction:
// sigma_hat^2 = (1/M) * sum_j (y_j - prediction)^2 with divisor M.
EmpiricalVariance empirical_variance(const std::string& image_id, const SaliencyMap& prediction,
                                     const std::vector<SaliencyMap>& noisy_labels);

// KL(q || p) for univariate Gaussians:
// log(p.stddev/q.stddev) + (q.stddev^2 + (q.mean-p.mean)^2)/(2 p.stddev^2) - 1/2.
double kl_gaussian(const GaussianSpec& q, const GaussianSpec& p);

// Sum over images and pixels of the zero-mean Gaussian KL between the bank's
// variances and the empirical ones.
double noise_loss(const NoiseBank& bank,
                  const std::map<std::string, EmpiricalVariance>& empirical,
                  double variance_floor = kVarianceFloor);

// Relaxation step toward the empirical variance:
// sigma^2 <- sigma^2 + alpha * (sigma_hat^2 - sigma^2).
VarianceMap update_variance(const VarianceMap& current, const EmpiricalVariance& empirical,
                            double alpha);

}  // namespace nlsd
