#pragma once

#include <string>
#include <vector>

#include "nlsd/tensor.hpp"

namespace nlsd {

// Planar channel-major image, values in [0,1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int channels, int height, int width, double fill = 0.0);

  long long pixels() const { return static_cast<long long>(height) * width; }
  long long numel() const { return static_cast<long long>(channels) * height * width; }

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Single-channel row-major map, values nominally in [0,1].
struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  SaliencyMap() = default;
  SaliencyMap(int height, int width, double fill = 0.0);

  long long pixels() const { return static_cast<long long>(height) * width; }

  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Rescales to [0,1] by the map's own min/max; a constant map becomes 0.5
// everywhere so downstream thresholds see an uninformative mid-grey.
SaliencyMap minmax_normalize(const SaliencyMap& raw);

// Channel mean, used when a stored label arrives with more than one channel.
SaliencyMap image_to_gray(const Image& img);

Tensor image_to_tensor(const Image& img);
Tensor map_to_tensor(const SaliencyMap& map);
SaliencyMap tensor_to_map(const Tensor& t);

}  // namespace nlsd
