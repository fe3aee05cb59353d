/*
 * Copyright 2026 The umix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Seeded synthetic segmentation data: axis-aligned rectangles and ellipses of
// distinct classes on a background (class 0), colored by class plus Gaussian
// pixel noise.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "umix/errors.hpp"
#include "umix/tensor.hpp"

namespace umix {

enum class ShapeKind { kRectangle, kEllipse };

/// A placed shape; the bounding box is half-open [y0, y1) x [x0, x1).
struct PlacedShape {
  ShapeKind kind = ShapeKind::kRectangle;
  int class_id = 1;
  std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;

  bool contains(std::size_t y, std::size_t x) const {
    if (y < y0 || y >= y1 || x < x0 || x >= x1) return false;
    if (kind == ShapeKind::kRectangle) return true;
    const double cy = 0.5 * static_cast<double>(y0 + y1);
    const double cx = 0.5 * static_cast<double>(x0 + x1);
    const double ry = 0.5 * static_cast<double>(y1 - y0);
    const double rx = 0.5 * static_cast<double>(x1 - x0);
    const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
    const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};

struct Sample {
  Tensor image;             // [H, W, 3]
  std::vector<int> labels;  // H * W class ids, row-major
  std::vector<PlacedShape> shapes;
};

struct DatasetOptions {
  std::uint64_t seed = 0;
  std::size_t count = 200;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t num_classes = 4;
  double noise = 0.05;
  std::size_t max_shapes = 4;
  bool rectangles = true;
  bool ellipses = true;
  /// Image sides must be multiples of this (2^{N+1} for an N-stage model).
  std::size_t size_multiple = 32;
  double min_background = 0.2;
  double max_background = 0.9;
};

struct SyntheticDataset {
  DatasetOptions options;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }

  std::vector<std::uint64_t> class_histogram() const {
    std::vector<std::uint64_t> h(options.num_classes, 0);
    for (const auto& s : samples)
      for (int l : s.labels) ++h[static_cast<std::size_t>(l)];
    return h;
  }
};

/// RGB color of a class; the palette is fixed and well separated.
inline std::array<double, 3> class_color(int class_id) {
  static constexpr std::array<std::array<double, 3>, 8> kPalette = {{
      {0.50, 0.50, 0.50},
      {0.90, 0.15, 0.15},
      {0.15, 0.80, 0.20},
      {0.15, 0.25, 0.90},
      {0.95, 0.85, 0.10},
      {0.85, 0.20, 0.85},
      {0.10, 0.85, 0.85},
      {0.05, 0.05, 0.05},
  }};
  if (class_id < static_cast<int>(kPalette.size()))
    return kPalette[static_cast<std::size_t>(class_id)];
  // Golden-ratio hue walk for larger label spaces.
  const double hue = std::fmod(0.61803398875 * class_id, 1.0) * 6.0;
  const double f = hue - std::floor(hue);
  switch (static_cast<int>(hue)) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

namespace detail {

inline Sample draw_sample(const DatasetOptions& o, std::mt19937_64& rng) {
  const std::size_t h = o.height, w = o.width;
  const std::size_t max_shapes = std::min(o.max_shapes, o.num_classes - 1);
  std::vector<int> pool(o.num_classes - 1);
  std::iota(pool.begin(), pool.end(), 1);

  Sample s;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::uniform_int_distribution<std::size_t> count_dist(1, max_shapes);
    const std::size_t count = count_dist(rng);
    std::shuffle(pool.begin(), pool.end(), rng);
    s.shapes.clear();
    for (std::size_t k = 0; k < count; ++k) {
      PlacedShape p;
      p.class_id = pool[k];
      if (o.rectangles && o.ellipses)
        p.kind = std::bernoulli_distribution(0.5)(rng) ? ShapeKind::kEllipse
                                                       : ShapeKind::kRectangle;
      else
        p.kind = o.ellipses ? ShapeKind::kEllipse : ShapeKind::kRectangle;
      std::uniform_int_distribution<std::size_t> hd(std::max<std::size_t>(2, h / 6),
                                                    std::max<std::size_t>(2, 2 * h / 3));
      std::uniform_int_distribution<std::size_t> wd(std::max<std::size_t>(2, w / 6),
                                                    std::max<std::size_t>(2, 2 * w / 3));
      const std::size_t sh = std::min(hd(rng), h), sw = std::min(wd(rng), w);
      p.y0 = std::uniform_int_distribution<std::size_t>(0, h - sh)(rng);
      p.x0 = std::uniform_int_distribution<std::size_t>(0, w - sw)(rng);
      p.y1 = p.y0 + sh;
      p.x1 = p.x0 + sw;
      s.shapes.push_back(p);
    }
    // Later shapes paint over earlier ones.
    s.labels.assign(h * w, 0);
    for (const PlacedShape& p : s.shapes)
      for (std::size_t y = p.y0; y < p.y1; ++y)
        for (std::size_t x = p.x0; x < p.x1; ++x)
          if (p.contains(y, x)) s.labels[y * w + x] = p.class_id;
    const auto bg = static_cast<double>(
        std::count(s.labels.begin(), s.labels.end(), 0));
    const double frac = bg / static_cast<double>(h * w);
    if (frac >= o.min_background && frac <= o.max_background) {
      s.image = Tensor(Shape{h, w, 3});
      std::normal_distribution<double> noise(0.0, 1.0);
      for (std::size_t i = 0; i < h * w; ++i) {
        const auto col = class_color(s.labels[i]);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double n = o.noise > 0.0 ? o.noise * noise(rng) : 0.0;
          s.image[i * 3 + ch] = col[ch] + n;
        }
      }
      return s;
    }
  }
  throw ConfigError("generate_dataset: could not place shapes with a "
                    "background fraction in [" +
                    std::to_string(o.min_background) + ", " +
                    std::to_string(o.max_background) + "]");
}

}  // namespace detail

inline SyntheticDataset generate_dataset(const DatasetOptions& o) {
  if (o.num_classes < 2)
    throw ConfigError("generate_dataset: need at least 2 classes");
  if (o.num_classes > 255)
    throw ConfigError("generate_dataset: at most 255 classes are supported");
  if (o.size_multiple == 0 || o.height == 0 || o.width == 0 ||
      o.height % o.size_multiple || o.width % o.size_multiple)
    throw ConfigError("generate_dataset: image size " + std::to_string(o.height) +
                      "x" + std::to_string(o.width) +
                      " must be a positive multiple of " +
                      std::to_string(o.size_multiple));
  if (o.max_shapes < 1) throw ConfigError("generate_dataset: max_shapes < 1");
  if (!o.rectangles && !o.ellipses)
    throw ConfigError("generate_dataset: no shape kinds enabled");
  if (o.noise < 0.0) throw ConfigError("generate_dataset: negative noise");
  if (!(o.min_background < o.max_background))
    throw ConfigError("generate_dataset: empty background fraction range");

  SyntheticDataset ds;
  ds.options = o;
  std::mt19937_64 rng(o.seed);
  ds.samples.reserve(o.count);
  for (std::size_t i = 0; i < o.count; ++i)
    ds.samples.push_back(detail::draw_sample(o, rng));
  return ds;
}

/// Nearest-neighbour downsampling of a label map by an integer factor; output
/// pixel i samples source floor((i + 0.5) * factor).
inline std::vector<int> downsample_labels(const std::vector<int>& labels,
                                          std::size_t h, std::size_t w,
                                          std::size_t factor) {
  if (factor == 0 || h % factor || w % factor)
    throw ConfigError("downsample_labels: " + std::to_string(h) + "x" +
                      std::to_string(w) + " not divisible by " +
                      std::to_string(factor));
  const std::size_t oh = h / factor, ow = w / factor, off = factor / 2;
  std::vector<int> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      out[y * ow + x] = labels[(y * factor + off) * w + x * factor + off];
  return out;
}

/// First `count - val` samples train, the rest validate.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(
    const SyntheticDataset& ds, double val_fraction) {
  const auto n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(ds.size())));
  const std::size_t n_train = ds.size() - std::min(n_val, ds.size());
  std::vector<Sample> train(ds.samples.begin(), ds.samples.begin() + n_train);
  std::vector<Sample> val(ds.samples.begin() + n_train, ds.samples.end());
  return {std::move(train), std::move(val)};
}

/// Writes "UMXD" | u32 version | u64 header length | JSON options | per
/// sample: f64 image[H*W*3], i32 labels[H*W]. Little-endian.
inline void save_dataset(const std::string& path, const SyntheticDataset& ds) {
  const auto& o = ds.options;
  nlohmann::json h = {{"seed", o.seed},           {"count", ds.size()},
                      {"height", o.height},       {"width", o.width},
                      {"num_classes", o.num_classes}, {"noise", o.noise},
                      {"max_shapes", o.max_shapes}, {"size_multiple", o.size_multiple}};
  const std::string header = h.dump();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("save_dataset: cannot open '" + path + "'");
  auto put = [&](const void* p, std::size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  const std::uint32_t version = 1;
  const auto len = static_cast<std::uint64_t>(header.size());
  put("UMXD", 4);
  put(&version, sizeof version);
  put(&len, sizeof len);
  put(header.data(), header.size());
  for (const Sample& s : ds.samples) {
    put(s.image.data().data(), s.image.size() * sizeof(double));
    for (int l : s.labels) {
      const auto v = static_cast<std::int32_t>(l);
      put(&v, sizeof v);
    }
  }
  if (!f) throw UsageError("save_dataset: write to '" + path + "' failed");
}

inline SyntheticDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("load_dataset: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  std::size_t pos = 0;
  auto get = [&](void* dst, std::size_t n) {
    if (bytes.size() - pos < n)
      throw ConfigError("load_dataset: '" + path + "' is truncated");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "UMXD", 4) != 0)
    throw ConfigError("load_dataset: '" + path + "' is not a dataset file");
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  get(&version, sizeof version);
  if (version != 1)
    throw ConfigError("load_dataset: unsupported version " +
                      std::to_string(version));
  get(&len, sizeof len);
  if (len > bytes.size() - pos)
    throw ConfigError("load_dataset: '" + path + "' is truncated");
  SyntheticDataset ds;
  std::size_t count = 0;
  try {
    const auto h = nlohmann::json::parse(bytes.substr(pos, len));
    auto& o = ds.options;
    o.seed = h.at("seed").get<std::uint64_t>();
    o.height = h.at("height").get<std::size_t>();
    o.width = h.at("width").get<std::size_t>();
    o.num_classes = h.at("num_classes").get<std::size_t>();
    o.noise = h.at("noise").get<double>();
    o.max_shapes = h.at("max_shapes").get<std::size_t>();
    o.size_multiple = h.at("size_multiple").get<std::size_t>();
    count = h.at("count").get<std::size_t>();
    o.count = count;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("load_dataset: bad header: ") + e.what());
  }
  pos += len;
  const std::size_t hw = ds.options.height * ds.options.width;
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.image = Tensor(Shape{ds.options.height, ds.options.width, 3});
    get(s.image.data().data(), hw * 3 * sizeof(double));
    s.labels.resize(hw);
    for (int& l : s.labels) {
      std::int32_t v;
      get(&v, sizeof v);
      if (v < 0 || static_cast<std::size_t>(v) >= ds.options.num_classes)
        throw ConfigError("load_dataset: label out of range");
      l = v;
    }
    ds.samples.push_back(std::move(s));
  }
  if (pos != bytes.size())
    throw ConfigError("load_dataset: trailing bytes in '" + path + "'");
  return ds;
}

}  // namespace umix
