#include "nlsd/predictor.hpp"

#include <cmath>
#include <stdexcept>

#include "nlsd/rng.hpp"

namespace nlsd {

void PredictorConfig::validate() const {
  if (in_channels < 1) throw std::invalid_argument("predictor: in_channels must be >= 1");
  if (channels.empty()) throw std::invalid_argument("predictor: needs at least one stage");
  for (int c : channels) {
    if (c < 1) throw std::invalid_argument("predictor: stage widths must be >= 1");
  }
  if (channels.back() != 1) {
    throw std::invalid_argument("predictor: final stage must emit one channel, got " +
                                std::to_string(channels.back()));
  }
  if (dilations.size() != channels.size()) {
    throw std::invalid_argument("predictor: need one dilation per stage (" +
                                std::to_string(channels.size()) + " stages, " +
                                std::to_string(dilations.size()) + " dilations)");
  }
  for (int d : dilations) {
    if (d < 1) throw std::invalid_argument("predictor: dilations must be >= 1");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("predictor: kernel must be odd and >= 1, got " +
                                std::to_string(kernel));
  }
  if (input_height < 1 || input_width < 1) {
    throw std::invalid_argument("predictor: input size must be positive");
  }
}

long long param_count(const PredictorConfig& cfg) {
  cfg.validate();
  long long total = 0;
  int prev = cfg.in_channels;
  for (int c : cfg.channels) {
    total += static_cast<long long>(c) * prev * cfg.kernel * cfg.kernel + c;
    prev = c;
  }
  return total;
}

std::vector<Tensor> init_params(const PredictorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  StreamRng rng(derive_stream(seed, {fnv1a("predictor-init")}));
  std::vector<Tensor> params;
  params.reserve(cfg.channels.size() * 2);
  int prev = cfg.in_channels;
  for (int c : cfg.channels) {
    const double fan_in = static_cast<double>(prev) * cfg.kernel * cfg.kernel;
    const double fan_out = static_cast<double>(c) * cfg.kernel * cfg.kernel;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor w({c, prev, cfg.kernel, cfg.kernel});
    for (double& v : w.data) v = rng.next_uniform(-limit, limit);
    params.push_back(std::move(w));
    params.emplace_back(std::vector<int>{c}, 0.0);
    prev = c;
  }
  return params;
}

namespace {

void check_params(const PredictorConfig& cfg, const std::vector<Tensor>& params) {
  if (params.size() != cfg.channels.size() * 2) {
    throw std::invalid_argument("predictor: expected " +
                                std::to_string(cfg.channels.size() * 2) +
                                " parameter tensors, got " + std::to_string(params.size()));
  }
}

void check_size(const PredictorConfig& cfg, const Image& img) {
  if (img.height != cfg.input_height || img.width != cfg.input_width) {
    throw std::invalid_argument("predictor: image is " + std::to_string(img.width) + "x" +
                                std::to_string(img.height) + " but config expects " +
                                std::to_string(cfg.input_width) + "x" +
                                std::to_string(cfg.input_height));
  }
}

}  // namespace

Tensor prepare_input(const PredictorConfig& cfg, const Image& img) {
  check_size(cfg, img);
  if (img.channels == cfg.in_channels) return image_to_tensor(img);
  if (img.channels == 1) {
    Tensor t({cfg.in_channels, img.height, img.width});
    for (int c = 0; c < cfg.in_channels; ++c) {
      std::copy(img.data.begin(), img.data.end(),
                t.data.begin() + static_cast<std::ptrdiff_t>(c) * img.pixels());
    }
    return t;
  }
  throw std::invalid_argument("predictor: image has " + std::to_string(img.channels) +
                              " channels, config expects " + std::to_string(cfg.in_channels));
}

SaliencyMap predict(const PredictorConfig& cfg, const std::vector<Tensor>& params,
                    const Image& img) {
  cfg.validate();
  check_params(cfg, params);
  Tensor x = prepare_input(cfg, img);
  for (std::size_t stage = 0; stage < cfg.channels.size(); ++stage) {
    const int d = cfg.dilations[stage];
    const Conv2dSpec spec{1, d, d * (cfg.kernel - 1) / 2};
    x = conv2d_forward(x, params[stage * 2], spec);
    x = bias_add_forward(x, params[stage * 2 + 1]);
    x = (stage + 1 < cfg.channels.size()) ? relu_forward(x) : sigmoid_forward(x);
  }
  return tensor_to_map(x);
}

PredictorGraph build_predictor_graph(Graph& g, const PredictorConfig& cfg,
                                     const std::vector<Tensor>& params, const Image& img) {
  cfg.validate();
  check_params(cfg, params);
  PredictorGraph out;
  out.param_ids.reserve(params.size());
  for (const Tensor& p : params) {
    Tensor leaf = p;
    leaf.requires_grad = true;
    out.param_ids.push_back(g.leaf(std::move(leaf)));
  }
  int x = g.leaf(prepare_input(cfg, img));
  for (std::size_t stage = 0; stage < cfg.channels.size(); ++stage) {
    const int d = cfg.dilations[stage];
    x = g.conv2d(x, out.param_ids[stage * 2], 1, d, d * (cfg.kernel - 1) / 2);
    x = g.bias_add(x, out.param_ids[stage * 2 + 1]);
    x = (stage + 1 < cfg.channels.size()) ? g.relu(x) : g.sigmoid(x);
  }
  out.output = x;
  return out;
}

}  // namespace nlsd
