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

// Reference implementations written directly from the definitions, on plain
// std::vector storage. They share no code with the library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec random_vec(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                      double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

/// c[i][j] = sum_k a[i][k] b[k][j], accumulated in long double.
inline Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k,
                  std::size_t p) {
  Vec c(m * p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      long double s = 0;
      for (std::size_t t = 0; t < k; ++t)
        s += static_cast<long double>(a[i * k + t]) * b[t * p + j];
      c[i * p + j] = static_cast<double>(s);
    }
  return c;
}

/// Non-overlapping mean over k x k windows of an [h, w, c] map.
inline Vec avg_pool(const Vec& x, std::size_t h, std::size_t w, std::size_t c,
                    std::size_t k) {
  const std::size_t oh = h / k, ow = w / k;
  Vec out(oh * ow * c);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t ch = 0; ch < c; ++ch) {
        long double s = 0;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx)
            s += x[((oy * k + dy) * w + ox * k + dx) * c + ch];
        out[(oy * ow + ox) * c + ch] = static_cast<double>(s / (k * k));
      }
  return out;
}

/// Half-pixel-centre bilinear resize of an [h, w, c] map to [oh, ow, c]:
/// source coordinate (o + 0.5) * in / out - 0.5, clamped to [0, in - 1].
inline Vec bilinear(const Vec& x, std::size_t h, std::size_t w, std::size_t c,
                    std::size_t oh, std::size_t ow) {
  auto coord = [](std::size_t o, std::size_t in, std::size_t out) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) /
                   static_cast<double>(out) -
               0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  Vec out(oh * ow * c);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double sy = coord(oy, h, oh), sx = coord(ox, w, ow);
      const auto y0 = static_cast<std::size_t>(std::floor(sy));
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        auto at = [&](std::size_t y, std::size_t xx) { return x[(y * w + xx) * c + ch]; };
        out[(oy * ow + ox) * c + ch] =
            (1 - fy) * (1 - fx) * at(y0, x0) + (1 - fy) * fx * at(y0, x1) +
            fy * (1 - fx) * at(y1, x0) + fy * fx * at(y1, x1);
      }
    }
  return out;
}

/// Row-wise (x - mean) / sqrt(var + eps) * gamma + beta with the biased
/// two-pass variance.
inline Vec layer_norm(const Vec& x, std::size_t rows, std::size_t cols,
                      const Vec& gamma, const Vec& beta, double eps) {
  Vec out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    long double mean = 0;
    for (std::size_t j = 0; j < cols; ++j) mean += x[r * cols + j];
    mean /= cols;
    long double var = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      const long double d = x[r * cols + j] - mean;
      var += d * d;
    }
    var /= cols;
    const long double inv = 1.0L / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j)
      out[r * cols + j] =
          static_cast<double>((x[r * cols + j] - mean) * inv * gamma[j] + beta[j]);
  }
  return out;
}

inline Vec softmax_row(const Vec& s) {
  long double z = 0;
  const double m = *std::max_element(s.begin(), s.end());
  for (double v : s) z += std::exp(static_cast<long double>(v - m));
  Vec out(s.size());
  for (std::size_t j = 0; j < s.size(); ++j)
    out[j] = static_cast<double>(std::exp(static_cast<long double>(s[j] - m)) / z);
  return out;
}

/// y = x W + b for x[rows, in], W[in, out].
inline Vec linear(const Vec& x, std::size_t rows, std::size_t in,
                  std::size_t out, const Vec& w, const Vec& b) {
  Vec y = matmul(x, w, rows, in, out);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out; ++j) y[r * out + j] += b[j];
  return y;
}

/// Single-head attention with projections, scalar loops throughout.
inline Vec attention_1head(const Vec& xq, std::size_t lq, std::size_t cq,
                           const Vec& xkv, std::size_t lkv, std::size_t ckv,
                           std::size_t dk, const Vec& wq, const Vec& bq,
                           const Vec& wk, const Vec& bk, const Vec& wv,
                           const Vec& bv, const Vec& wo, const Vec& bo) {
  const Vec q = linear(xq, lq, cq, dk, wq, bq);
  const Vec k = linear(xkv, lkv, ckv, dk, wk, bk);
  const Vec v = linear(xkv, lkv, ckv, dk, wv, bv);
  Vec mixed(lq * dk, 0.0);
  for (std::size_t i = 0; i < lq; ++i) {
    Vec s(lkv);
    for (std::size_t j = 0; j < lkv; ++j) {
      long double dot = 0;
      for (std::size_t t = 0; t < dk; ++t)
        dot += static_cast<long double>(q[i * dk + t]) * k[j * dk + t];
      s[j] = static_cast<double>(dot / std::sqrt(static_cast<long double>(dk)));
    }
    const Vec p = softmax_row(s);
    for (std::size_t t = 0; t < dk; ++t) {
      long double acc = 0;
      for (std::size_t j = 0; j < lkv; ++j)
        acc += static_cast<long double>(p[j]) * v[j * dk + t];
      mixed[i * dk + t] = static_cast<double>(acc);
    }
  }
  return linear(mixed, lq, dk, cq, wo, bo);
}

/// Mean over rows with label >= 0 of logsumexp(row) - row[label].
inline double cross_entropy(const Vec& logits, std::size_t rows,
                            std::size_t k, const std::vector<int>& labels) {
  long double total = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0) continue;
    double m = logits[r * k];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, logits[r * k + j]);
    long double z = 0;
    for (std::size_t j = 0; j < k; ++j)
      z += std::exp(static_cast<long double>(logits[r * k + j] - m));
    total += std::log(z) + m - logits[r * k + static_cast<std::size_t>(labels[r])];
    ++n;
  }
  return static_cast<double>(total / n);
}

inline double gelu(double x) {
  const double c = std::sqrt(2.0 / M_PI);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

/// mIoU from per-class set counting, no confusion matrix: for each class the
/// intersection and union of the predicted and true pixel sets.
inline double miou(const std::vector<int>& pred, const std::vector<int>& truth,
                   int k) {
  double total = 0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] < 0) continue;
      const bool p = pred[i] == c, t = truth[i] == c;
      inter += p && t;
      uni += p || t;
    }
    if (uni == 0) continue;
    total += static_cast<double>(inter) / static_cast<double>(uni);
    ++present;
  }
  return present ? total / present : 0.0;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
