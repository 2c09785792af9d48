#include "nlsd/labellers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nlsd/rng.hpp"

namespace nlsd {

double GridSegmentation::diagonal() const {
  return std::hypot(static_cast<double>(height), static_cast<double>(width));
}

bool GridSegmentation::is_boundary_cell(int cell) const {
  const int row = cell / grid_cols;
  const int col = cell % grid_cols;
  return row == 0 || row == grid_rows - 1 || col == 0 || col == grid_cols - 1;
}

GridSegmentation segment_grid(const Image& image, int cell_size) {
  if (cell_size < 1) throw std::invalid_argument("segment_grid: cell_size must be >= 1");
  GridSegmentation seg;
  seg.cell_size = cell_size;
  seg.height = image.height;
  seg.width = image.width;
  seg.grid_rows = (image.height + cell_size - 1) / cell_size;
  seg.grid_cols = (image.width + cell_size - 1) / cell_size;
  const int n = seg.cells();
  seg.cell_of.resize(static_cast<std::size_t>(image.pixels()));
  seg.cell_color.assign(static_cast<std::size_t>(n),
                        std::vector<double>(static_cast<std::size_t>(image.channels), 0.0));
  seg.cell_center.assign(static_cast<std::size_t>(n), {0.0, 0.0});
  seg.cell_area.assign(static_cast<std::size_t>(n), 0);

  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int cell = (y / cell_size) * seg.grid_cols + (x / cell_size);
      seg.cell_of[static_cast<std::size_t>(y) * image.width + x] = cell;
      seg.cell_area[static_cast<std::size_t>(cell)] += 1;
      seg.cell_center[static_cast<std::size_t>(cell)][0] += y;
      seg.cell_center[static_cast<std::size_t>(cell)][1] += x;
      for (int c = 0; c < image.channels; ++c) {
        seg.cell_color[static_cast<std::size_t>(cell)][static_cast<std::size_t>(c)] +=
            image.at(c, y, x);
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    const double inv = 1.0 / seg.cell_area[static_cast<std::size_t>(k)];
    seg.cell_center[static_cast<std::size_t>(k)][0] *= inv;
    seg.cell_center[static_cast<std::size_t>(k)][1] *= inv;
    for (double& v : seg.cell_color[static_cast<std::size_t>(k)]) v *= inv;
  }
  return seg;
}

double cell_color_distance(const GridSegmentation& seg, int a, int b) {
  const auto& ca = seg.cell_color[static_cast<std::size_t>(a)];
  const auto& cb = seg.cell_color[static_cast<std::size_t>(b)];
  double s = 0.0;
  for (std::size_t c = 0; c < ca.size(); ++c) {
    const double d = ca[c] - cb[c];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(ca.size()));
}

namespace {

double cell_spatial_sq(const GridSegmentation& seg, int a, int b) {
  const double dy = seg.cell_center[static_cast<std::size_t>(a)][0] -
                    seg.cell_center[static_cast<std::size_t>(b)][0];
  const double dx = seg.cell_center[static_cast<std::size_t>(a)][1] -
                    seg.cell_center[static_cast<std::size_t>(b)][1];
  return dy * dy + dx * dx;
}

SaliencyMap broadcast_scores(const GridSegmentation& seg, const std::vector<double>& scores) {
  SaliencyMap out(seg.height, seg.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = scores[static_cast<std::size_t>(seg.cell_of[i])];
  }
  return out;
}

LabellerOutput emit(const GridSegmentation& seg, std::string name,
                    const std::vector<double>& scores, bool invert) {
  SaliencyMap map = minmax_normalize(broadcast_scores(seg, scores));
  if (invert) {
    for (double& v : map.data) v = 1.0 - v;
  }
  return LabellerOutput{std::move(name), std::move(map)};
}

// Lloyd k-means over cell colors with a k-means++ start on a fixed internal
// stream; ties go to the lowest cluster index so runs are reproducible.
std::vector<int> kmeans_cells(const GridSegmentation& seg, int k, int iterations) {
  const int n = seg.cells();
  k = std::min(k, n);
  StreamRng rng(derive_stream(0, {fnv1a("bndcon-kmeans")}));

  std::vector<std::vector<double>> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(seg.cell_color[static_cast<std::size_t>(rng.next_index(n))]);
  std::vector<double> d2(static_cast<std::size_t>(n), 0.0);
  auto color_sq = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      const double d = a[c] - b[c];
      s += d * d;
    }
    return s;
  };
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = color_sq(seg.cell_color[static_cast<std::size_t>(i)], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        best = std::min(best, color_sq(seg.cell_color[static_cast<std::size_t>(i)], centers[c]));
      }
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    int pick;
    if (total <= 0.0) {
      pick = rng.next_index(n);
    } else {
      const double r = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(seg.cell_color[static_cast<std::size_t>(pick)]);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < iterations; ++it) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = color_sq(seg.cell_color[static_cast<std::size_t>(i)], centers[0]);
      for (int c = 1; c < static_cast<int>(centers.size()); ++c) {
        const double d =
            color_sq(seg.cell_color[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) moved = true;
      assign[static_cast<std::size_t>(i)] = best;
    }
    std::vector<std::vector<double>> next(centers.size(),
                                          std::vector<double>(centers[0].size(), 0.0));
    std::vector<int> counts(centers.size(), 0);
    for (int i = 0; i < n; ++i) {
      const int c = assign[static_cast<std::size_t>(i)];
      counts[static_cast<std::size_t>(c)] += 1;
      for (std::size_t ch = 0; ch < next[0].size(); ++ch) {
        next[static_cast<std::size_t>(c)][ch] += seg.cell_color[static_cast<std::size_t>(i)][ch];
      }
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its old center
      for (std::size_t ch = 0; ch < centers[c].size(); ++ch) {
        centers[c][ch] = next[c][ch] / counts[c];
      }
    }
    if (!moved && it > 0) break;
  }
  return assign;
}

}  // namespace

std::vector<double> global_contrast_scores(const GridSegmentation& seg) {
  const int n = seg.cells();
  std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += cell_color_distance(seg, i, j);
    scores[static_cast<std::size_t>(i)] = s;
  }
  return scores;
}

std::vector<double> local_contrast_scores(const GridSegmentation& seg, double delta_p) {
  if (!(delta_p > 0.0)) throw std::invalid_argument("local_contrast: delta_p must be > 0");
  const int n = seg.cells();
  const double inv_two_d2 = 1.0 / (2.0 * delta_p * delta_p);
  std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double z = 0.0, s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w = std::exp(-cell_spatial_sq(seg, i, j) * inv_two_d2);
      z += w;
      s += w * cell_color_distance(seg, i, j);
    }
    scores[static_cast<std::size_t>(i)] = s / z;
  }
  return scores;
}

std::vector<double> compactness_scores(const GridSegmentation& seg, double c) {
  if (c < 0.0) throw std::invalid_argument("compactness: c must be >= 0");
  const int n = seg.cells();
  const double diag = seg.diagonal();
  std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d_spatial = std::sqrt(cell_spatial_sq(seg, i, j)) / diag;
      s += cell_color_distance(seg, i, j) / (1.0 + c * d_spatial);
    }
    scores[static_cast<std::size_t>(i)] = s;
  }
  return scores;
}

double boundary_connectivity_value(double boundary_length, double area) {
  if (!(area > 0.0)) throw std::invalid_argument("boundary_connectivity_value: area must be > 0");
  if (boundary_length < 0.0) {
    throw std::invalid_argument("boundary_connectivity_value: negative boundary length");
  }
  return boundary_length / std::sqrt(area);
}

double background_weight(double bndcon, double delta_bnd) {
  if (!(delta_bnd > 0.0)) {
    throw std::invalid_argument("background_weight: delta_bnd must be > 0");
  }
  return 1.0 - std::exp(-(bndcon * bndcon) / (2.0 * delta_bnd * delta_bnd));
}

std::vector<double> boundary_connectivity_scores(const GridSegmentation& seg, double delta_p,
                                                 double delta_bnd) {
  if (!(delta_p > 0.0) || !(delta_bnd > 0.0)) {
    throw std::invalid_argument("boundary_connectivity: bandwidths must be > 0");
  }
  const int n = seg.cells();
  const std::vector<int> region = kmeans_cells(seg, 8, 20);
  const int k = 1 + *std::max_element(region.begin(), region.end());

  std::vector<double> len_bnd(static_cast<std::size_t>(k), 0.0);
  std::vector<double> area(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < n; ++i) {
    const int r = region[static_cast<std::size_t>(i)];
    area[static_cast<std::size_t>(r)] += 1.0;
    if (seg.is_boundary_cell(i)) len_bnd[static_cast<std::size_t>(r)] += 1.0;
  }
  std::vector<double> omega_bg(static_cast<std::size_t>(k), 0.0);
  for (int r = 0; r < k; ++r) {
    if (area[static_cast<std::size_t>(r)] <= 0.0) continue;
    const double bndcon = boundary_connectivity_value(len_bnd[static_cast<std::size_t>(r)],
                                                      area[static_cast<std::size_t>(r)]);
    omega_bg[static_cast<std::size_t>(r)] = background_weight(bndcon, delta_bnd);
  }

  const double inv_two_d2 = 1.0 / (2.0 * delta_p * delta_p);
  std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(-cell_spatial_sq(seg, i, j) * inv_two_d2);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w_spa = std::exp(-cell_spatial_sq(seg, i, j) * inv_two_d2) / z;
      s += cell_color_distance(seg, i, j) * w_spa *
           omega_bg[static_cast<std::size_t>(region[static_cast<std::size_t>(j)])];
    }
    scores[static_cast<std::size_t>(i)] = s;
  }
  return scores;
}

LabellerOutput global_contrast(const GridSegmentation& seg) {
  return emit(seg, "global_contrast", global_contrast_scores(seg), false);
}

LabellerOutput local_contrast(const GridSegmentation& seg, double delta_p) {
  return emit(seg, "local_contrast", local_contrast_scores(seg, delta_p), false);
}

LabellerOutput compactness(const GridSegmentation& seg, double c) {
  return emit(seg, "compactness", compactness_scores(seg, c), true);
}

LabellerOutput boundary_connectivity(const GridSegmentation& seg, double delta_bnd) {
  const double delta_p = 0.25 * seg.diagonal();
  return emit(seg, "boundary_connectivity",
              boundary_connectivity_scores(seg, delta_p, delta_bnd), false);
}

LabellerOutput center_prior(const Image& image, double sigma_c) {
  if (!(sigma_c > 0.0)) throw std::invalid_argument("center_prior: sigma_c must be > 0");
  SaliencyMap map(image.height, image.width);
  const double cy = (image.height - 1) / 2.0;
  const double cx = (image.width - 1) / 2.0;
  const double diag2 = static_cast<double>(image.height) * image.height +
                       static_cast<double>(image.width) * image.width;
  const double inv = 1.0 / (2.0 * sigma_c * sigma_c * diag2);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double dy = y - cy, dx = x - cx;
      map.at(y, x) = std::exp(-(dy * dy + dx * dx) * inv);
    }
  }
  return LabellerOutput{"center_prior", minmax_normalize(map)};
}

LabellerOutput synthetic_labeller(const SaliencyMap& gt, double sigma_true,
                                  const SaliencyMap* bias, std::uint64_t seed) {
  if (sigma_true < 0.0) throw std::invalid_argument("synthetic_labeller: sigma must be >= 0");
  if (bias && (bias->height != gt.height || bias->width != gt.width)) {
    throw std::invalid_argument("synthetic_labeller: bias shape does not match gt");
  }
  StreamRng rng(derive_stream(seed, {fnv1a("synthetic-labeller")}));
  SaliencyMap map(gt.height, gt.width);
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    double v = gt.data[i] + sigma_true * rng.next_gaussian();
    if (bias) v += bias->data[i];
    map.data[i] = std::clamp(v, 0.0, 1.0);
  }
  return LabellerOutput{"synthetic", std::move(map)};
}

std::vector<LabellerOutput> run_prior_labellers(const Image& image, const PriorParams& params) {
  const GridSegmentation seg = segment_grid(image, params.cell_size);
  const double delta_p = params.delta_p_frac * seg.diagonal();
  std::vector<LabellerOutput> out;
  out.push_back(global_contrast(seg));
  out.push_back(local_contrast(seg, delta_p));
  out.push_back(compactness(seg, params.compactness_c));
  out.push_back(boundary_connectivity(seg, params.delta_bnd));
  if (params.include_center) out.push_back(center_prior(image, params.sigma_c));
  return out;
}

}  // namespace nlsd
