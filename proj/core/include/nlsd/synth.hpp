#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlsd/image.hpp"

namespace nlsd {

// Controlled corpus: binary ground truth shapes, RGB renderings, and labels
// produced as clamp(gt + labeller bias + Gaussian noise). Per-image noise
// levels cycle through sigma_true, so variance recovery can be checked
// against known targets.
struct SynthSpec {
  int count = 32;
  int size = 16;  // square images
  int labellers = 4;
  std::vector<double> sigma_true = {0.05, 0.1, 0.2};
  double bias_strength = 0.0;  // per-labeller spatial bias amplitude
  std::string shapes = "mixed";  // rect | disc | mixed
  // Ground-truth levels for background/foreground. The defaults give binary
  // masks; moving them into the interior keeps label noise clear of the
  // [0,1] clamp so recovered variances track sigma_true instead of its
  // censored remnant.
  double gt_low = 0.0;
  double gt_high = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic per-labeller bias field (ramps and center bumps, mean near
// zero), scaled by strength.
SaliencyMap labeller_bias_field(int labeller_index, int height, int width, double strength);

// Writes images/, gt/, labels/labeller<j>/ and corpus_manifest.json under
// out_root. Byte-identical for identical (spec, seed).
void generate_synthetic_corpus(const SynthSpec& spec, const std::string& out_root);

}  // namespace nlsd
