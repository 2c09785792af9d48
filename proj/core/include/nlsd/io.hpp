#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsd/dataset.hpp"
#include "nlsd/image.hpp"
#include "nlsd/predictor.hpp"

namespace nlsd {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Decoders sniff the file magic (PNG or PGM P5) and map 8-bit samples to
// [0,1] as v/255. load_image keeps the decoded channel count (1 or 3);
// load_map averages channels down to one.
Image load_image(const std::string& path);
SaliencyMap load_map(const std::string& path);

// Encoders quantize as round(v*255), clamped to [0,255].
void save_gray_png(const std::string& path, const SaliencyMap& map);
void save_rgb_png(const std::string& path, const Image& img);
void save_pgm(const std::string& path, const SaliencyMap& map);

// Reads <root>/images/, <root>/labels/<labeller>/ and optionally <root>/gt/.
// Ids are sorted image filename stems; every labeller directory must contain
// a file matching each image's filename.
Dataset ingest_dataset(const std::string& root);

// Content hash over ids, shapes and pixel data; stable for a fixed dataset.
std::uint64_t dataset_fingerprint(const Dataset& ds);

std::map<std::string, SaliencyMap> predict_dataset(const PredictorConfig& cfg,
                                                   const std::vector<Tensor>& params,
                                                   const Dataset& ds);

// One grayscale PNG per image under out_dir, named <id>.png.
void export_maps(const PredictorConfig& cfg, const std::vector<Tensor>& params,
                 const Dataset& ds, const std::string& out_dir);

}  // namespace nlsd
