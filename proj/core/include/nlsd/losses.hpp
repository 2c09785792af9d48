#pragma once

#include <map>
#include <string>
#include <vector>

#include "nlsd/noise.hpp"

namespace nlsd {

struct LossBreakdown {
  double prediction_loss = 0.0;
  double noise_loss = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

// Pixel cross-entropy with the prediction truncated to [0,1] and clamped
// away from log(0). Targets must already lie in [0,1].
double cross_entropy(double y, double y_hat);

// Sum over images, labellers and pixels of cross_entropy(label, pred + noise).
// The noise-injected prediction is what gets truncated, so pixels pushed
// outside [0,1] stop producing gradient.
double prediction_loss(const std::map<std::string, SaliencyMap>& predictions,
                       const std::map<std::string, std::vector<NoiseMap>>& noise,
                       const std::map<std::string, std::vector<SaliencyMap>>& labels);

LossBreakdown total_loss(double prediction, double noise, double lambda);

}  // namespace nlsd
