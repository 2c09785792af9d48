#include "nlsd/image.hpp"

#include <algorithm>
#include <stdexcept>

namespace nlsd {

Image::Image(int channels_in, int height_in, int width_in, double fill)
    : channels(channels_in), height(height_in), width(width_in) {
  if (channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("image: dimensions must be positive");
  }
  data.assign(static_cast<std::size_t>(numel()), fill);
}

SaliencyMap::SaliencyMap(int height_in, int width_in, double fill)
    : height(height_in), width(width_in) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("saliency map: dimensions must be positive");
  }
  data.assign(static_cast<std::size_t>(pixels()), fill);
}

SaliencyMap minmax_normalize(const SaliencyMap& raw) {
  SaliencyMap out = raw;
  if (out.data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(out.data.begin(), out.data.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo <= 0.0) {
    std::fill(out.data.begin(), out.data.end(), 0.5);
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (double& v : out.data) v = (v - lo) * inv;
  return out;
}

SaliencyMap image_to_gray(const Image& img) {
  SaliencyMap out(img.height, img.width);
  const double inv_c = 1.0 / img.channels;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(c, y, x);
      out.at(y, x) = s * inv_c;
    }
  }
  return out;
}

Tensor image_to_tensor(const Image& img) {
  return Tensor({img.channels, img.height, img.width}, img.data);
}

Tensor map_to_tensor(const SaliencyMap& map) {
  return Tensor({1, map.height, map.width}, map.data);
}

SaliencyMap tensor_to_map(const Tensor& t) {
  if (t.shape.size() == 3 && t.shape[0] == 1) {
    SaliencyMap out(t.shape[1], t.shape[2]);
    out.data = t.data;
    return out;
  }
  if (t.shape.size() == 2) {
    SaliencyMap out(t.shape[0], t.shape[1]);
    out.data = t.data;
    return out;
  }
  throw std::invalid_argument("tensor_to_map: expected [1,H,W] or [H,W], got " +
                              shape_str(t.shape));
}

}  // namespace nlsd
