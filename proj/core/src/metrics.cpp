#include "nlsd/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace nlsd {

namespace {

void check_unit_range(const SaliencyMap& m, const char* what) {
  for (double v : m.data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(std::string(what) + ": values must lie in [0,1]");
    }
  }
}

void check_binary(const SaliencyMap& gt) {
  for (double v : gt.data) {
    if (v != 0.0 && v != 1.0) {
      throw std::invalid_argument("ground truth must be strictly binary");
    }
  }
}

void check_same_shape(const SaliencyMap& a, const SaliencyMap& b) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("metric inputs have different shapes");
  }
}

}  // namespace

double mae(const SaliencyMap& s, const SaliencyMap& gt) {
  check_same_shape(s, gt);
  check_unit_range(s, "mae: prediction");
  check_unit_range(gt, "mae: ground truth");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.data.size(); ++i) sum += std::fabs(s.data[i] - gt.data[i]);
  return sum / static_cast<double>(s.data.size());
}

double f_measure(double precision, double recall, double beta_squared) {
  if (!(beta_squared > 0.0)) throw std::invalid_argument("f_measure: beta_squared must be > 0");
  if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0)) {
    throw std::invalid_argument("f_measure: precision/recall must lie in [0,1]");
  }
  const double denom = beta_squared * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + beta_squared) * precision * recall / denom;
}

std::vector<PRPoint> pr_curve(const SaliencyMap& s, const SaliencyMap& gt_binary) {
  check_same_shape(s, gt_binary);
  check_unit_range(s, "pr_curve: prediction");
  check_binary(gt_binary);

  // Histogram the quantized map separately over gt-positive and gt-negative
  // pixels, then sweep thresholds with suffix sums.
  long long pos_hist[256] = {0};
  long long neg_hist[256] = {0};
  long long total_pos = 0;
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    const int q = static_cast<int>(std::lround(s.data[i] * 255.0));
    if (gt_binary.data[i] == 1.0) {
      ++pos_hist[q];
      ++total_pos;
    } else {
      ++neg_hist[q];
    }
  }

  std::vector<PRPoint> curve(256);
  long long tp = 0, fp = 0;
  for (int t = 255; t >= 0; --t) {
    tp += pos_hist[t];
    fp += neg_hist[t];
    PRPoint& pt = curve[static_cast<std::size_t>(t)];
    pt.threshold = t;
    pt.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    pt.recall = total_pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(total_pos);
  }
  return curve;
}

double mean_f_measure(const SaliencyMap& s, const SaliencyMap& gt_binary,
                      const MetricConfig& cfg) {
  check_same_shape(s, gt_binary);
  check_unit_range(s, "mean_f_measure: prediction");
  check_binary(gt_binary);

  double mean = 0.0;
  for (double v : s.data) mean += v;
  mean /= static_cast<double>(s.data.size());
  const double threshold = std::min(cfg.adaptive_scale * mean, 1.0 - 1e-9);

  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    const bool predicted = s.data[i] >= threshold;
    const bool actual = gt_binary.data[i] == 1.0;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
  }
  const double precision =
      (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall =
      (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return f_measure(precision, recall, cfg.beta_squared);
}

DatasetMetrics evaluate_dataset(const std::map<std::string, SaliencyMap>& predictions,
                                const std::map<std::string, SaliencyMap>& ground_truth,
                                const MetricConfig& cfg) {
  if (predictions.size() != ground_truth.size()) {
    throw std::invalid_argument("evaluate_dataset: prediction/gt image sets differ");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("evaluate_dataset: empty dataset");
  }
  DatasetMetrics out;
  out.pr.assign(256, PRPoint{});
  for (int t = 0; t < 256; ++t) out.pr[static_cast<std::size_t>(t)].threshold = t;

  for (const auto& [id, pred] : predictions) {
    auto it = ground_truth.find(id);
    if (it == ground_truth.end()) {
      throw std::invalid_argument("evaluate_dataset: no ground truth for image '" + id + "'");
    }
    ImageMetrics im;
    im.id = id;
    im.mae = mae(pred, it->second);
    im.f_beta = mean_f_measure(pred, it->second, cfg);
    out.mean_mae += im.mae;
    out.mean_f += im.f_beta;
    const std::vector<PRPoint> curve = pr_curve(pred, it->second);
    for (int t = 0; t < 256; ++t) {
      out.pr[static_cast<std::size_t>(t)].precision += curve[static_cast<std::size_t>(t)].precision;
      out.pr[static_cast<std::size_t>(t)].recall += curve[static_cast<std::size_t>(t)].recall;
    }
    out.per_image.push_back(std::move(im));
  }
  const double inv = 1.0 / static_cast<double>(predictions.size());
  out.mean_mae *= inv;
  out.mean_f *= inv;
  for (PRPoint& pt : out.pr) {
    pt.precision *= inv;
    pt.recall *= inv;
  }
  return out;
}

}  // namespace nlsd
