#include "nlsd/losses.hpp"

#include <stdexcept>

#include "nlsd/tensor.hpp"

namespace nlsd {

double cross_entropy(double y, double y_hat) { return detail::truncated_cross_entropy(y, y_hat); }

double prediction_loss(const std::map<std::string, SaliencyMap>& predictions,
                       const std::map<std::string, std::vector<NoiseMap>>& noise,
                       const std::map<std::string, std::vector<SaliencyMap>>& labels) {
  if (predictions.size() != labels.size() || predictions.size() != noise.size()) {
    throw std::invalid_argument("prediction_loss: image sets differ in size");
  }
  double total = 0.0;
  for (const auto& [id, pred] : predictions) {
    auto label_it = labels.find(id);
    auto noise_it = noise.find(id);
    if (label_it == labels.end() || noise_it == noise.end()) {
      throw std::invalid_argument("prediction_loss: missing labels or noise for image '" + id +
                                  "'");
    }
    const auto& image_labels = label_it->second;
    const auto& image_noise = noise_it->second;
    if (image_labels.size() != image_noise.size()) {
      throw std::invalid_argument("prediction_loss: labeller sets differ for image '" + id + "'");
    }
    for (std::size_t j = 0; j < image_labels.size(); ++j) {
      const SaliencyMap& label = image_labels[j];
      const NoiseMap& n = image_noise[j];
      if (label.height != pred.height || label.width != pred.width ||
          n.height != pred.height || n.width != pred.width) {
        throw std::invalid_argument("prediction_loss: shape mismatch for image '" + id + "'");
      }
      for (std::size_t i = 0; i < label.data.size(); ++i) {
        total += detail::truncated_cross_entropy(label.data[i], pred.data[i] + n.data[i]);
      }
    }
  }
  return total;
}

LossBreakdown total_loss(double prediction, double noise, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be >= 0");
  LossBreakdown out;
  out.prediction_loss = prediction;
  out.noise_loss = noise;
  out.lambda = lambda;
  out.total = prediction + lambda * noise;
  return out;
}

}  // namespace nlsd
