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

// Dense row-major float64 tensors of rank 1..4 and the primitive kernels the
// rest of the library builds on. Feature maps use the [H, W, C] layout so that
// channel concatenation is a sequence of contiguous block copies.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "umix/errors.hpp"

namespace umix {

class Shape {
 public:
  Shape() : dims_{1} {}
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    validate();
  }

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  std::size_t back() const { return dims_.back(); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::size_t numel() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::string to_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) os << ',';
      os << dims_[i];
    }
    os << ']';
    return os.str();
  }

  friend bool operator==(const Shape& a, const Shape& b) = default;

 private:
  void validate() const {
    if (dims_.empty() || dims_.size() > 4)
      throw DimensionError("tensor rank must be in 1..4, got " +
                           std::to_string(dims_.size()));
    for (std::size_t d : dims_)
      if (d == 0) throw DimensionError("tensor dimensions must be >= 1");
  }

  std::vector<std::size_t> dims_;
};

class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw DimensionError("tensor of shape " + shape_.to_string() +
                           " needs " + std::to_string(shape_.numel()) +
                           " values, got " + std::to_string(data_.size()));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }
  static Tensor identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[offset(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return data_[offset(i, j)]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[offset(i, j, k)];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[offset(i, j, k)];
  }

  /// Bitwise equality of shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

 private:
  std::size_t offset(std::size_t i, std::size_t j) const {
    return i * shape_[1] + j;
  }
  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * shape_[1] + j) * shape_[2] + k;
  }

  Shape shape_;
  std::vector<double> data_;
};

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         t.shape().to_string());
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.shape().to_string() + " vs " +
                         b.shape().to_string());
}

inline void debug_check_finite(const Tensor& t, const char* op) {
#ifndef NDEBUG
  if (!t.all_finite())
    throw NumericalError(std::string(op) + " produced a non-finite value");
#else
  (void)t;
  (void)op;
#endif
}

// Source taps of a 1-D bilinear resize with the align-corners=false
// convention: src = (i + 0.5) * in / out - 0.5, clamped to [0, in - 1].
struct LinearTap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of `hi`
};

inline std::vector<LinearTap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<LinearTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::max(src, 0.0);
    auto lo = static_cast<std::size_t>(src);
    lo = std::min(lo, in - 1);
    const std::size_t hi = std::min(lo + 1, in - 1);
    const double frac = hi == lo ? 0.0 : src - static_cast<double>(lo);
    taps[i] = {lo, hi, frac};
  }
  return taps;
}

// a + w (b - a): returns `a` exactly when a == b.
inline double lerp(double a, double b, double w) { return a + w * (b - a); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

inline void add_inplace(Tensor& acc, const Tensor& x) {
  detail::require_same_shape(acc, x, "add_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

inline double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

/// x[M, N] + bias[N] broadcast over rows.
inline Tensor add_row(const Tensor& x, const Tensor& bias) {
  detail::require_rank(x, 2, "add_row");
  if (bias.size() != x.dim(1))
    throw DimensionError("add_row: bias " + bias.shape().to_string() +
                         " does not match rows of " + x.shape().to_string());
  Tensor out = x;
  const std::size_t n = x.dim(1);
  for (std::size_t r = 0; r < x.dim(0); ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias[c];
  return out;
}

// ---------------------------------------------------------------------------
// Layout

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.numel() != x.size())
    throw DimensionError("reshape: cannot view " + x.shape().to_string() +
                         " as " + shape.to_string());
  return Tensor(std::move(shape), x.values());
}

inline Tensor transpose_2d(const Tensor& x) {
  detail::require_rank(x, 2, "transpose_2d");
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return out;
}

/// Concatenates along the last axis. All leading dimensions must agree.
inline Tensor concat_channels(std::span<const Tensor> xs) {
  if (xs.empty()) throw DimensionError("concat_channels: empty input list");
  const Shape& first = xs[0].shape();
  std::size_t total = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const Shape& s = xs[j].shape();
    bool ok = s.rank() == first.rank();
    for (std::size_t a = 0; ok && a + 1 < s.rank(); ++a) ok = s[a] == first[a];
    if (!ok)
      throw DimensionError("concat_channels: input " + std::to_string(j) +
                           " has shape " + s.to_string() +
                           ", incompatible with " + first.to_string());
    total += s.back();
  }
  std::vector<std::size_t> dims = first.dims();
  dims.back() = total;
  Tensor out{Shape(dims)};
  const std::size_t rows = xs[0].size() / first.back();
  std::size_t offset = 0;
  for (const Tensor& x : xs) {
    const std::size_t c = x.shape().back();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(x.data().begin() + r * c, c,
                  out.data().begin() + r * total + offset);
    offset += c;
  }
  return out;
}

/// Channels [begin, begin + count) of the last axis.
inline Tensor slice_channels(const Tensor& x, std::size_t begin,
                             std::size_t count) {
  const std::size_t c = x.shape().back();
  if (count == 0 || begin + count > c)
    throw DimensionError("slice_channels: range [" + std::to_string(begin) +
                         "," + std::to_string(begin + count) +
                         ") out of bounds for " + x.shape().to_string());
  std::vector<std::size_t> dims = x.shape().dims();
  dims.back() = count;
  Tensor out{Shape(dims)};
  const std::size_t rows = x.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data().begin() + r * c + begin, count,
                out.data().begin() + r * count);
  return out;
}

/// Space-to-channel: [H, W, C] -> [H/r, W/r, r*r*C]. Within an output cell the
/// channel index is (dy * r + dx) * C + c.
inline Tensor pixel_unshuffle(const Tensor& x, std::size_t r) {
  detail::require_rank(x, 3, "pixel_unshuffle");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (r == 0 || h % r || w % r)
    throw ConfigError("pixel_unshuffle: " + x.shape().to_string() +
                      " not divisible by factor " + std::to_string(r));
  const std::size_t oh = h / r, ow = w / r, oc = r * r * c;
  Tensor out(Shape{oh, ow, oc});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t xx = 0; xx < ow; ++xx)
      for (std::size_t dy = 0; dy < r; ++dy)
        for (std::size_t dx = 0; dx < r; ++dx)
          std::copy_n(
              x.data().begin() + ((y * r + dy) * w + xx * r + dx) * c, c,
              out.data().begin() + (y * ow + xx) * oc + (dy * r + dx) * c);
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " +
                         a.shape().to_string() + " x " +
                         b.shape().to_string());
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor out(Shape{m, p});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = pc + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      const double* brow = pb + kk * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += av * brow[j];
    }
  }
  return out;
}

/// a[M,K] x b[P,K]^T without materializing the transpose.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw DimensionError("matmul_nt: incompatible shapes " +
                         a.shape().to_string() + " x " +
                         b.shape().to_string() + "^T");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(0);
  Tensor out(Shape{m, p});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += a[i * k + kk] * b[j * k + kk];
      out[i * p + j] = s;
    }
  return out;
}

/// a[K,M]^T x b[K,P].
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw DimensionError("matmul_tn: incompatible shapes " +
                         a.shape().to_string() + "^T x " +
                         b.shape().to_string());
  const std::size_t k = a.dim(0), m = a.dim(1), p = b.dim(1);
  Tensor out(Shape{m, p});
  for (std::size_t kk = 0; kk < k; ++kk)
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[kk * m + i];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += av * b[kk * p + j];
    }
  return out;
}

inline Tensor softmax_rows(const Tensor& x) {
  detail::require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.dim(0), p = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = x.data().data() + i * p;
    double* o = out.data().data() + i * p;
    const double mx = *std::max_element(in, in + p);
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < p; ++j) o[j] /= total;
  }
  detail::debug_check_finite(out, "softmax_rows");
  return out;
}

/// Non-overlapping average pooling; only kernel == stride is supported.
inline Tensor avg_pool(const Tensor& x, std::size_t kernel, std::size_t stride) {
  detail::require_rank(x, 3, "avg_pool");
  if (kernel != stride)
    throw ConfigError("avg_pool: only kernel == stride is supported (kernel=" +
                      std::to_string(kernel) +
                      ", stride=" + std::to_string(stride) + ")");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (kernel == 0 || h % kernel || w % kernel)
    throw ConfigError("avg_pool: spatial size " + x.shape().to_string() +
                      " not divisible by " + std::to_string(kernel));
  const std::size_t oh = h / kernel, ow = w / kernel;
  const double count = static_cast<double>(kernel * kernel);
  Tensor out(Shape{oh, ow, c});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t xx = 0; xx < ow; ++xx) {
      double* o = out.data().data() + (y * ow + xx) * c;
      for (std::size_t dy = 0; dy < kernel; ++dy)
        for (std::size_t dx = 0; dx < kernel; ++dx) {
          const double* in =
              x.data().data() + ((y * kernel + dy) * w + xx * kernel + dx) * c;
          for (std::size_t ch = 0; ch < c; ++ch) o[ch] += in[ch];
        }
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] /= count;
    }
  return out;
}

/// Bilinear resize of [H, W, C] to [out_h, out_w, C] (align-corners=false).
inline Tensor bilinear_upsample(const Tensor& x, std::size_t out_h,
                                std::size_t out_w) {
  detail::require_rank(x, 3, "bilinear_upsample");
  if (out_h == 0 || out_w == 0)
    throw ConfigError("bilinear_upsample: zero target size");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (out_h < h || out_w < w)
    throw ConfigError("bilinear_upsample: target " + std::to_string(out_h) +
                      "x" + std::to_string(out_w) + " smaller than input " +
                      x.shape().to_string());
  const auto ty = detail::bilinear_taps(h, out_h);
  const auto tx = detail::bilinear_taps(w, out_w);
  Tensor out(Shape{out_h, out_w, c});
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t xx = 0; xx < out_w; ++xx) {
      const double* p00 = x.data().data() + (ty[y].lo * w + tx[xx].lo) * c;
      const double* p01 = x.data().data() + (ty[y].lo * w + tx[xx].hi) * c;
      const double* p10 = x.data().data() + (ty[y].hi * w + tx[xx].lo) * c;
      const double* p11 = x.data().data() + (ty[y].hi * w + tx[xx].hi) * c;
      double* o = out.data().data() + (y * out_w + xx) * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = detail::lerp(p00[ch], p01[ch], tx[xx].frac);
        const double bottom = detail::lerp(p10[ch], p11[ch], tx[xx].frac);
        o[ch] = detail::lerp(top, bottom, ty[y].frac);
      }
    }
  return out;
}

}  // namespace umix
