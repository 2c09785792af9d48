#pragma once

#include <cstdint>
#include <vector>

#include "nlsd/image.hpp"
#include "nlsd/tensor.hpp"

namespace nlsd {

// Fully convolutional predictor: a stack of same-padded k x k convolutions
// (per-stage dilation) with ReLU between stages and a sigmoid on the
// single-channel output, so the emitted map matches the input resolution and
// lives in (0,1).
struct PredictorConfig {
  int in_channels = 3;
  std::vector<int> channels = {16, 16, 16, 1};  // per-stage output channels; last must be 1
  std::vector<int> dilations = {1, 2, 2, 1};    // one per stage
  int kernel = 3;                               // odd, so same padding is exact
  int input_height = 16;
  int input_width = 16;

  void validate() const;  // throws std::invalid_argument on a bad config
  int stages() const { return static_cast<int>(channels.size()); }
};

// Total scalar parameter count (weights + biases) for a config.
long long param_count(const PredictorConfig& cfg);

// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out)), fans counted as
// channels * k * k) and zero biases, laid out [w0, b0, w1, b1, ...]. All
// draws come from one stream derived from the seed, so identical seeds give
// identical parameters.
std::vector<Tensor> init_params(const PredictorConfig& cfg, std::uint64_t seed);

// Grayscale inputs are replicated to the configured channel count so one
// config serves every corpus.
Tensor prepare_input(const PredictorConfig& cfg, const Image& img);

// Inference-only forward pass; no tape is built.
SaliencyMap predict(const PredictorConfig& cfg, const std::vector<Tensor>& params,
                    const Image& img);

struct PredictorGraph {
  int output = -1;             // sigmoid node, shape [1,H,W]
  std::vector<int> param_ids;  // leaves in the same order as the params vector
};

// Builds the training tape: parameters enter as requires-grad leaves, the
// image as a constant leaf.
PredictorGraph build_predictor_graph(Graph& g, const PredictorConfig& cfg,
                                     const std::vector<Tensor>& params, const Image& img);

}  // namespace nlsd
