#include "nlsd/io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "nlsd/rng.hpp"

namespace fs = std::filesystem;

namespace nlsd {

namespace {

unsigned char quantize(double v) {
  const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<unsigned char>(q);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes a PNG to interleaved 8-bit samples with 1 or 3 channels.
void read_png(const std::string& path, std::vector<unsigned char>& pixels, int& width,
              int& height, int& channels) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png: allocation failed reading '" + path + "'");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png: allocation failed reading '" + path + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: failed to decode '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = static_cast<int>(w);
  height = static_cast<int>(h);
  channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.assign(rowbytes * h, 0);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
}

void write_png(const std::string& path, const std::vector<unsigned char>& pixels, int width,
               int height, int channels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png: allocation failed writing '" + path + "'");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: allocation failed writing '" + path + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: failed to encode '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(height));
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + y * rowbytes;
  png_write_rows(png, const_cast<png_bytepp>(rows.data()), static_cast<png_uint_32>(height));
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

bool sniff_png(std::ifstream& f) {
  unsigned char sig[8] = {0};
  f.read(reinterpret_cast<char*>(sig), 8);
  f.seekg(0);
  return f.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

int pgm_token(std::istream& in) {
  // Skips whitespace and '#' comment lines, then parses one integer.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw IoError("pgm: truncated header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("pgm: malformed header");
  return value;
}

Image read_pgm(const std::string& path, std::ifstream& f) {
  char magic[2] = {0, 0};
  f.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') throw IoError("'" + path + "' is not a P5 PGM");
  const int width = pgm_token(f);
  const int height = pgm_token(f);
  const int maxval = pgm_token(f);
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) {
    throw IoError("pgm '" + path + "': unsupported dimensions or maxval");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (f.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("pgm '" + path + "': truncated pixel data");
  }
  Image img(1, height, width);
  const double inv = 1.0 / maxval;
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] * inv;
  return img;
}

Image decode_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  if (sniff_png(f)) {
    f.close();
    std::vector<unsigned char> pixels;
    int width = 0, height = 0, channels = 0;
    read_png(path, pixels, width, height, channels);
    Image img(channels, height, width);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < channels; ++c) {
          img.at(c, y, x) =
              pixels[(static_cast<std::size_t>(y) * width + x) * channels + c] / 255.0;
        }
      }
    }
    return img;
  }
  return read_pgm(path, f);
}

std::vector<std::string> sorted_dir_names(const fs::path& dir, bool directories) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : entry.is_regular_file()) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

Image load_image(const std::string& path) { return decode_file(path); }

SaliencyMap load_map(const std::string& path) {
  const Image img = decode_file(path);
  if (img.channels == 1) {
    SaliencyMap map(img.height, img.width);
    map.data = img.data;
    return map;
  }
  return image_to_gray(img);
}

void save_gray_png(const std::string& path, const SaliencyMap& map) {
  std::vector<unsigned char> pixels(map.data.size());
  for (std::size_t i = 0; i < map.data.size(); ++i) pixels[i] = quantize(map.data[i]);
  write_png(path, pixels, map.width, map.height, 1);
}

void save_rgb_png(const std::string& path, const Image& img) {
  if (img.channels != 3) throw IoError("save_rgb_png: image must have 3 channels");
  std::vector<unsigned char> pixels(static_cast<std::size_t>(img.pixels()) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        pixels[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = quantize(img.at(c, y, x));
      }
    }
  }
  write_png(path, pixels, img.width, img.height, 3);
}

void save_pgm(const std::string& path, const SaliencyMap& map) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  for (double v : map.data) f.put(static_cast<char>(quantize(v)));
  if (!f) throw IoError("pgm '" + path + "': write failed");
}

Dataset ingest_dataset(const std::string& root) {
  const fs::path base(root);
  const fs::path images_dir = base / "images";
  const fs::path labels_dir = base / "labels";
  const fs::path gt_dir = base / "gt";
  if (!fs::is_directory(images_dir)) {
    throw IoError("dataset '" + root + "': missing images/ directory");
  }
  if (!fs::is_directory(labels_dir)) {
    throw IoError("dataset '" + root + "': missing labels/ directory");
  }

  Dataset ds;
  ds.labeller_names = sorted_dir_names(labels_dir, true);
  if (ds.labeller_names.empty()) {
    throw IoError("dataset '" + root + "': labels/ has no labeller directories");
  }

  for (const std::string& filename : sorted_dir_names(images_dir, false)) {
    DatasetImage im;
    im.id = fs::path(filename).stem().string();
    const fs::path image_path = images_dir / filename;
    im.image = load_image(image_path.string());

    for (const std::string& labeller : ds.labeller_names) {
      const fs::path label_path = labels_dir / labeller / filename;
      if (!fs::is_regular_file(label_path)) {
        throw IoError("dataset: image '" + im.id + "' has no map under labeller '" + labeller +
                      "'");
      }
      SaliencyMap label = load_map(label_path.string());
      if (label.height != im.image.height || label.width != im.image.width) {
        throw IoError("dataset: '" + label_path.string() + "' is " +
                      std::to_string(label.width) + "x" + std::to_string(label.height) +
                      " but '" + image_path.string() + "' is " + std::to_string(im.image.width) +
                      "x" + std::to_string(im.image.height));
      }
      im.labels.push_back(std::move(label));
    }

    const fs::path gt_path = gt_dir / filename;
    if (fs::is_regular_file(gt_path)) {
      im.gt = load_map(gt_path.string());
      if (im.gt.height != im.image.height || im.gt.width != im.image.width) {
        throw IoError("dataset: '" + gt_path.string() + "' does not match '" +
                      image_path.string() + "' in size");
      }
      im.has_gt = true;
    }
    ds.images.push_back(std::move(im));
  }
  ds.validate();
  return ds;
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
  auto hash_doubles = [](std::uint64_t state, const std::vector<double>& values) {
    return fnv1a_accumulate(
        state, std::string_view(reinterpret_cast<const char*>(values.data()),
                                values.size() * sizeof(double)));
  };
  std::uint64_t h = fnv1a("dataset-v1");
  for (const DatasetImage& im : ds.images) {
    h = fnv1a_accumulate(h, im.id);
    const int dims[3] = {im.image.channels, im.image.height, im.image.width};
    h = fnv1a_accumulate(h, std::string_view(reinterpret_cast<const char*>(dims), sizeof(dims)));
    h = hash_doubles(h, im.image.data);
    for (const SaliencyMap& label : im.labels) h = hash_doubles(h, label.data);
    if (im.has_gt) h = hash_doubles(h, im.gt.data);
  }
  return h;
}

std::map<std::string, SaliencyMap> predict_dataset(const PredictorConfig& cfg,
                                                   const std::vector<Tensor>& params,
                                                   const Dataset& ds) {
  std::map<std::string, SaliencyMap> out;
  for (const DatasetImage& im : ds.images) {
    out.emplace(im.id, predict(cfg, params, im.image));
  }
  return out;
}

void export_maps(const PredictorConfig& cfg, const std::vector<Tensor>& params,
                 const Dataset& ds, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const DatasetImage& im : ds.images) {
    const SaliencyMap map = predict(cfg, params, im.image);
    save_gray_png((fs::path(out_dir) / (im.id + ".png")).string(), map);
  }
}

}  // namespace nlsd
