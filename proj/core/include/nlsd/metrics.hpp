#pragma once

#include <map>
#include <string>
#include <vector>

#include "nlsd/image.hpp"

namespace nlsd {

struct MetricConfig {
  double beta_squared = 0.3;
  double adaptive_scale = 2.0;  // adaptive threshold = min(scale * mean(s), 1 - 1e-9)
};

struct PRPoint {
  int threshold = 0;  // 0..255 over round(s * 255)
  double precision = 0.0;
  double recall = 0.0;
};

// Mean absolute per-pixel difference; both maps must be in [0,1].
double mae(const SaliencyMap& s, const SaliencyMap& gt);

// Weighted harmonic mean (1+b2)PR / (b2 P + R); 0 when the denominator is 0.
double f_measure(double precision, double recall, double beta_squared);

// 256-point curve over thresholds on round(s*255) >= t. Conventions: empty
// prediction set gives precision 1, empty ground truth gives recall 1.
std::vector<PRPoint> pr_curve(const SaliencyMap& s, const SaliencyMap& gt_binary);

// Binarizes the continuous map at twice its mean (capped just under 1) and
// scores the resulting mask.
double mean_f_measure(const SaliencyMap& s, const SaliencyMap& gt_binary,
                      const MetricConfig& cfg = {});

struct ImageMetrics {
  std::string id;
  double mae = 0.0;
  double f_beta = 0.0;
};

struct DatasetMetrics {
  double mean_mae = 0.0;
  double mean_f = 0.0;
  std::vector<PRPoint> pr;  // per-threshold mean precision/recall over images
  std::vector<ImageMetrics> per_image;
};

DatasetMetrics evaluate_dataset(const std::map<std::string, SaliencyMap>& predictions,
                                const std::map<std::string, SaliencyMap>& ground_truth,
                                const MetricConfig& cfg = {});

}  // namespace nlsd
