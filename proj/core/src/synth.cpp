#include "nlsd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "nlsd/io.hpp"
#include "nlsd/labellers.hpp"
#include "nlsd/rng.hpp"

namespace fs = std::filesystem;

namespace nlsd {

void SynthSpec::validate() const {
  if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
  if (size < 8) throw std::invalid_argument("synth: size must be >= 8");
  if (labellers < 1) throw std::invalid_argument("synth: need at least one labeller");
  if (sigma_true.empty()) throw std::invalid_argument("synth: sigma_true list is empty");
  for (double s : sigma_true) {
    if (s < 0.0) throw std::invalid_argument("synth: sigma_true entries must be >= 0");
  }
  if (bias_strength < 0.0) throw std::invalid_argument("synth: bias_strength must be >= 0");
  if (shapes != "rect" && shapes != "disc" && shapes != "mixed") {
    throw std::invalid_argument("synth: shapes must be rect, disc or mixed");
  }
  if (!(gt_low >= 0.0 && gt_low < gt_high && gt_high <= 1.0)) {
    throw std::invalid_argument("synth: need 0 <= gt_low < gt_high <= 1");
  }
}

SaliencyMap labeller_bias_field(int labeller_index, int height, int width, double strength) {
  SaliencyMap field(height, width);
  if (strength == 0.0) return field;
  const double cy = (height - 1) / 2.0;
  const double cx = (width - 1) / 2.0;
  const double diag2 = static_cast<double>(height) * height + static_cast<double>(width) * width;
  const int kind = labeller_index % 4;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      switch (kind) {
        case 0:
          v = width > 1 ? static_cast<double>(x) / (width - 1) - 0.5 : 0.0;
          break;
        case 1:
          v = height > 1 ? static_cast<double>(y) / (height - 1) - 0.5 : 0.0;
          break;
        case 2:
        case 3: {
          const double dy = y - cy, dx = x - cx;
          const double bump = std::exp(-(dy * dy + dx * dx) / (2.0 * 0.0625 * diag2));
          v = bump - 0.5;
          if (kind == 3) v = -v;
          break;
        }
      }
      field.at(y, x) = strength * v;
    }
  }
  return field;
}

namespace {

struct ShapeInfo {
  std::string kind;
  SaliencyMap gt;
};

ShapeInfo draw_shape(const SynthSpec& spec, int index) {
  StreamRng rng(derive_stream(spec.seed, {fnv1a("synth-gt"), static_cast<std::uint64_t>(index)}));
  const int n = spec.size;
  SaliencyMap gt(n, n);

  bool rect;
  if (spec.shapes == "rect") {
    rect = true;
  } else if (spec.shapes == "disc") {
    rect = false;
  } else {
    rect = index % 2 == 0;
  }

  if (rect) {
    // Keep a one-cell margin so the frame rows stay background.
    const int min_side = std::max(2, n / 4);
    const int w = min_side + rng.next_index(n / 2 - min_side + 1);
    const int h = min_side + rng.next_index(n / 2 - min_side + 1);
    const int x0 = 1 + rng.next_index(n - w - 1);
    const int y0 = 1 + rng.next_index(n - h - 1);
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) gt.at(y, x) = 1.0;
    }
    return {"rect", std::move(gt)};
  }

  const double r_min = n / 6.0, r_max = n / 3.0;
  const double r = r_min + rng.next_double() * (r_max - r_min);
  const double cy = n / 4.0 + rng.next_double() * (n / 2.0);
  const double cx = n / 4.0 + rng.next_double() * (n / 2.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= r * r) gt.at(y, x) = 1.0;
    }
  }
  return {"disc", std::move(gt)};
}

Image render_image(const SynthSpec& spec, int index, const SaliencyMap& gt) {
  StreamRng rng(
      derive_stream(spec.seed, {fnv1a("synth-image"), static_cast<std::uint64_t>(index)}));
  double bg[3], fg[3];
  for (int c = 0; c < 3; ++c) bg[c] = rng.next_uniform(0.10, 0.40);
  for (int c = 0; c < 3; ++c) fg[c] = rng.next_uniform(0.60, 0.90);

  Image img(3, gt.height, gt.width);
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const bool inside = gt.at(y, x) == 1.0;
      for (int c = 0; c < 3; ++c) {
        const double texture = 0.02 * rng.next_gaussian();
        img.at(c, y, x) = std::clamp((inside ? fg[c] : bg[c]) + texture, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::string image_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "img%03d", index);
  return buf;
}

}  // namespace

void generate_synthetic_corpus(const SynthSpec& spec, const std::string& out_root) {
  spec.validate();
  const fs::path root(out_root);
  fs::create_directories(root / "images");
  fs::create_directories(root / "gt");
  for (int j = 0; j < spec.labellers; ++j) {
    fs::create_directories(root / "labels" / ("labeller" + std::to_string(j)));
  }

  std::vector<SaliencyMap> bias_fields;
  for (int j = 0; j < spec.labellers; ++j) {
    bias_fields.push_back(labeller_bias_field(j, spec.size, spec.size, spec.bias_strength));
  }

  nlohmann::ordered_json manifest;
  manifest["count"] = spec.count;
  manifest["size"] = spec.size;
  manifest["labellers"] = spec.labellers;
  manifest["sigma_true"] = spec.sigma_true;
  manifest["bias_strength"] = spec.bias_strength;
  manifest["shapes"] = spec.shapes;
  manifest["gt_low"] = spec.gt_low;
  manifest["gt_high"] = spec.gt_high;
  manifest["seed"] = spec.seed;
  manifest["images"] = nlohmann::ordered_json::array();

  for (int i = 0; i < spec.count; ++i) {
    const std::string id = image_id(i);
    const double sigma = spec.sigma_true[static_cast<std::size_t>(i) % spec.sigma_true.size()];
    ShapeInfo shape = draw_shape(spec, i);
    const Image img = render_image(spec, i, shape.gt);

    SaliencyMap gt = shape.gt;
    if (spec.gt_low != 0.0 || spec.gt_high != 1.0) {
      for (double& v : gt.data) v = v == 1.0 ? spec.gt_high : spec.gt_low;
    }

    save_rgb_png((root / "images" / (id + ".png")).string(), img);
    save_gray_png((root / "gt" / (id + ".png")).string(), gt);
    for (int j = 0; j < spec.labellers; ++j) {
      const std::uint64_t label_seed =
          derive_stream(spec.seed, {fnv1a("synth-label"), static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(j)});
      const LabellerOutput label = synthetic_labeller(
          gt, sigma, &bias_fields[static_cast<std::size_t>(j)], label_seed);
      save_gray_png(
          (root / "labels" / ("labeller" + std::to_string(j)) / (id + ".png")).string(),
          label.map);
    }

    nlohmann::ordered_json row;
    row["id"] = id;
    row["sigma_true"] = sigma;
    row["shape"] = shape.kind;
    manifest["images"].push_back(std::move(row));
  }

  std::ofstream f(root / "corpus_manifest.json", std::ios::trunc);
  if (!f) throw IoError("synth: cannot write corpus manifest");
  f << manifest.dump(2) << '\n';
}

}  // namespace nlsd
