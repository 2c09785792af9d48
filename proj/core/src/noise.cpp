#include "nlsd/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "nlsd/rng.hpp"

namespace nlsd {

VarianceMap::VarianceMap(std::string image_id_in, int height_in, int width_in, double fill)
    : image_id(std::move(image_id_in)), height(height_in), width(width_in) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("variance map: dimensions must be positive");
  }
  values.assign(static_cast<std::size_t>(pixels()), fill);
}

void VarianceMap::validate() const {
  if (static_cast<long long>(values.size()) != pixels()) {
    throw std::invalid_argument("variance map '" + image_id + "': storage does not match shape");
  }
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("variance map '" + image_id +
                                  "': entries must be finite and >= 0");
    }
  }
}

EmpiricalVariance::EmpiricalVariance(std::string image_id_in, int height_in, int width_in,
                                     double fill)
    : image_id(std::move(image_id_in)), height(height_in), width(width_in) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("empirical variance: dimensions must be positive");
  }
  values.assign(static_cast<std::size_t>(pixels()), fill);
}

NoiseMap sample_noise(const VarianceMap& variance, int labeller_index, int round, int epoch,
                      std::uint64_t seed) {
  variance.validate();
  StreamRng rng(derive_stream(seed, {fnv1a("noise-sample"), fnv1a(variance.image_id),
                                     static_cast<std::uint64_t>(labeller_index),
                                     static_cast<std::uint64_t>(round),
                                     static_cast<std::uint64_t>(epoch)}));
  NoiseMap out(variance.height, variance.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    // Draw unconditionally so the stream position never depends on the
    // variance values; sigma = 0 still yields exactly 0.
    out.data[i] = std::sqrt(variance.values[i]) * rng.next_gaussian();
  }
  return out;
}

EmpiricalVariance empirical_variance(const std::string& image_id, const SaliencyMap& prediction,
                                     const std::vector<SaliencyMap>& noisy_labels) {
  if (noisy_labels.empty()) {
    throw std::invalid_argument("empirical_variance: need at least one label");
  }
  for (const SaliencyMap& label : noisy_labels) {
    if (label.height != prediction.height || label.width != prediction.width) {
      throw std::invalid_argument("empirical_variance: label shape does not match prediction");
    }
  }
  EmpiricalVariance out(image_id, prediction.height, prediction.width);
  const double inv_m = 1.0 / static_cast<double>(noisy_labels.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double s = 0.0;
    for (const SaliencyMap& label : noisy_labels) {
      const double r = label.data[i] - prediction.data[i];
      s += r * r;
    }
    out.values[i] = s * inv_m;
  }
  return out;
}

double kl_gaussian(const GaussianSpec& q, const GaussianSpec& p) {
  if (!(q.stddev > 0.0) || !(p.stddev > 0.0)) {
    throw std::domain_error("kl_gaussian: standard deviations must be positive");
  }
  const double dm = q.mean - p.mean;
  return std::log(p.stddev / q.stddev) +
         (q.stddev * q.stddev + dm * dm) / (2.0 * p.stddev * p.stddev) - 0.5;
}

double noise_loss(const NoiseBank& bank,
                  const std::map<std::string, EmpiricalVariance>& empirical,
                  double variance_floor) {
  if (bank.variances.size() != empirical.size()) {
    throw std::invalid_argument("noise_loss: image sets differ in size");
  }
  double total = 0.0;
  for (const auto& [id, var] : bank.variances) {
    auto it = empirical.find(id);
    if (it == empirical.end()) {
      throw std::invalid_argument("noise_loss: no empirical variance for image '" + id + "'");
    }
    const EmpiricalVariance& emp = it->second;
    if (emp.height != var.height || emp.width != var.width) {
      throw std::invalid_argument("noise_loss: shape mismatch for image '" + id + "'");
    }
    for (std::size_t i = 0; i < var.values.size(); ++i) {
      const double v_q = var.values[i];
      const double v_p = emp.values[i];
      if (v_q < variance_floor && v_p < variance_floor) continue;
      GaussianSpec q{0.0, std::sqrt(std::max(v_q, variance_floor))};
      GaussianSpec p{0.0, std::sqrt(std::max(v_p, variance_floor))};
      total += kl_gaussian(q, p);
    }
  }
  return total;
}

VarianceMap update_variance(const VarianceMap& current, const EmpiricalVariance& empirical,
                            double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("update_variance: alpha must be in (0, 1]");
  }
  if (current.height != empirical.height || current.width != empirical.width) {
    throw std::invalid_argument("update_variance: shape mismatch for image '" + current.image_id +
                                "'");
  }
  VarianceMap out = current;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] += alpha * (empirical.values[i] - out.values[i]);
  }
  return out;
}

}  // namespace nlsd
