#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nlsd/image.hpp"

namespace nlsd {

// Rectangular over-segmentation: cell_size x cell_size tiles in row-major
// grid order, with the last row/column clipped at the image border.
struct GridSegmentation {
  int cell_size = 0;
  int height = 0;
  int width = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  std::vector<int> cell_of;                       // per pixel, row-major
  std::vector<std::vector<double>> cell_color;    // per cell, C-vector mean
  std::vector<std::array<double, 2>> cell_center; // per cell, (y, x) centroid in pixels
  std::vector<int> cell_area;                     // per cell, pixel count

  int cells() const { return grid_rows * grid_cols; }
  double diagonal() const;
  bool is_boundary_cell(int cell) const;  // touches the image border
};

struct LabellerOutput {
  std::string name;
  SaliencyMap map;  // in [0,1], min-max normalized (constant raw map -> 0.5)
};

GridSegmentation segment_grid(const Image& image, int cell_size);

// Color distance between two cells, Euclidean over channel means divided by
// sqrt(C) so it lives in [0,1] for [0,1] channels.
double cell_color_distance(const GridSegmentation& seg, int a, int b);

// Raw per-cell scores, exposed so brute-force oracles can compare before the
// min-max step.
std::vector<double> global_contrast_scores(const GridSegmentation& seg);
std::vector<double> local_contrast_scores(const GridSegmentation& seg, double delta_p);
std::vector<double> compactness_scores(const GridSegmentation& seg, double c);
std::vector<double> boundary_connectivity_scores(const GridSegmentation& seg, double delta_p,
                                                 double delta_bnd);

// Scalar pieces of the boundary-connectivity labeller: the perimeter-to-size
// ratio of a region (lengths in cell units) and the background weight the
// ratio maps to.
double boundary_connectivity_value(double boundary_length, double area);
double background_weight(double bndcon, double delta_bnd);

// Handcrafted labellers. Each broadcasts its per-cell score to pixels and
// min-max normalizes. Compactness is inverted (1 - normalized) so compact
// color mass scores high.
LabellerOutput global_contrast(const GridSegmentation& seg);
LabellerOutput local_contrast(const GridSegmentation& seg, double delta_p);
LabellerOutput compactness(const GridSegmentation& seg, double c);
LabellerOutput boundary_connectivity(const GridSegmentation& seg, double delta_bnd);

// Pixelwise Gaussian bump around the image center, distances measured as a
// fraction of the diagonal.
LabellerOutput center_prior(const Image& image, double sigma_c);

// Controlled oracle: clamp(gt + bias + N(0, sigma_true^2), 0, 1). Not
// re-normalized, so the clamp is the only distortion of gt.
LabellerOutput synthetic_labeller(const SaliencyMap& gt, double sigma_true,
                                  const SaliencyMap* bias, std::uint64_t seed);

struct PriorParams {
  int cell_size = 4;
  double delta_p_frac = 0.25;  // local-contrast bandwidth as a diagonal fraction
  double compactness_c = 3.0;
  double delta_bnd = 1.0;
  double sigma_c = 0.3;
  bool include_center = false;
};

// The standard labeller battery: global contrast, local contrast,
// compactness, boundary connectivity, and optionally the center prior.
std::vector<LabellerOutput> run_prior_labellers(const Image& image,
                                                const PriorParams& params = {});

}  // namespace nlsd
