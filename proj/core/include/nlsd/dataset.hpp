#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nlsd/image.hpp"

namespace nlsd {

struct DatasetImage {
  std::string id;
  Image image;
  std::vector<SaliencyMap> labels;  // one per labeller, same M for every image
  SaliencyMap gt;                   // meaningful only when has_gt
  bool has_gt = false;
};

struct Dataset {
  std::vector<DatasetImage> images;  // sorted by id
  std::vector<std::string> labeller_names;

  int size() const { return static_cast<int>(images.size()); }
  int labellers() const { return images.empty() ? 0 : static_cast<int>(images[0].labels.size()); }

  bool all_have_gt() const {
    for (const DatasetImage& im : images) {
      if (!im.has_gt) return false;
    }
    return !images.empty();
  }

  void validate() const {
    if (images.empty()) throw std::invalid_argument("dataset: no images");
    const std::size_t m = images[0].labels.size();
    if (m == 0) throw std::invalid_argument("dataset: no labellers");
    for (const DatasetImage& im : images) {
      if (im.labels.size() != m) {
        throw std::invalid_argument("dataset: image '" + im.id + "' has " +
                                    std::to_string(im.labels.size()) + " labels, expected " +
                                    std::to_string(m));
      }
      for (const SaliencyMap& label : im.labels) {
        if (label.height != im.image.height || label.width != im.image.width) {
          throw std::invalid_argument("dataset: label shape mismatch for image '" + im.id + "'");
        }
      }
      if (im.has_gt && (im.gt.height != im.image.height || im.gt.width != im.image.width)) {
        throw std::invalid_argument("dataset: gt shape mismatch for image '" + im.id + "'");
      }
    }
  }
};

}  // namespace nlsd
