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

// Neural primitives: linear projection, layer norm, GELU, FFN, multi-head
// scaled dot-product attention, spatial reduction and cross-entropy.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/errors.hpp"
#include "umix/tensor.hpp"

namespace umix {

using Rng = std::mt19937_64;

inline constexpr double kLayerNormEpsilon = 1e-6;
inline constexpr int kIgnoreLabel = -1;

/// Normal(0, sigma) truncated to +-2 sigma by resampling.
inline double truncated_normal(Rng& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (;;) {
    const double z = dist(rng);
    if (std::abs(z) <= 2.0) return z * sigma;
  }
}

// ---------------------------------------------------------------------------
// Layers

struct LinearLayer {
  Parameter weight;  // [in, out]
  Parameter bias;    // [out]

  LinearLayer() = default;
  LinearLayer(const std::string& name, std::size_t in, std::size_t out,
              Rng& rng)
      : weight{name + ".weight", Tensor(Shape{in, out})},
        bias{name + ".bias", Tensor(Shape{out})} {
    const double sigma = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : weight.value.data()) w = truncated_normal(rng, sigma);
  }
  LinearLayer(const std::string& name, Tensor w, Tensor b)
      : weight{name + ".weight", std::move(w)},
        bias{name + ".bias", std::move(b)} {
    if (weight.value.rank() != 2 || bias.value.rank() != 1 ||
        bias.value.size() != weight.value.dim(1))
      throw DimensionError("LinearLayer " + name + ": weight " +
                           weight.value.shape().to_string() + " and bias " +
                           bias.value.shape().to_string() + " disagree");
  }

  std::size_t in_features() const { return weight.value.dim(0); }
  std::size_t out_features() const { return weight.value.dim(1); }
  std::size_t parameter_count() const {
    return weight.value.size() + bias.value.size();
  }
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

struct LayerNormLayer {
  Parameter gamma;
  Parameter beta;
  double epsilon = kLayerNormEpsilon;

  LayerNormLayer() = default;
  LayerNormLayer(const std::string& name, std::size_t channels)
      : gamma{name + ".gamma", Tensor::full(Shape{channels}, 1.0)},
        beta{name + ".beta", Tensor(Shape{channels})} {
    if (channels < 2)
      throw ConfigError("LayerNormLayer " + name + " needs >= 2 channels");
  }

  std::size_t channels() const { return gamma.value.size(); }
  std::size_t parameter_count() const { return 2 * channels(); }
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

/// Linear -> GELU -> Linear with hidden width ratio * channels.
struct FFNLayer {
  LinearLayer fc1;
  LinearLayer fc2;

  FFNLayer() = default;
  FFNLayer(const std::string& name, std::size_t channels, std::size_t ratio,
           Rng& rng)
      : fc1(name + ".fc1", channels, ratio * channels, rng),
        fc2(name + ".fc2", ratio * channels, channels, rng) {}

  std::size_t channels() const { return fc1.in_features(); }
  std::size_t hidden() const { return fc1.out_features(); }
  std::size_t parameter_count() const {
    return fc1.parameter_count() + fc2.parameter_count();
  }
  void collect(std::vector<Parameter*>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

/// Heads tied to query width so the per-head dimension stays near 32.
inline std::size_t default_num_heads(std::size_t query_channels) {
  return std::max<std::size_t>(1, query_channels / 32);
}

struct MultiHeadAttention {
  std::size_t num_heads = 1;
  std::size_t head_dim = 1;
  LinearLayer q_proj;  // [C_q, h*d_k]
  LinearLayer k_proj;  // [C_kv, h*d_k]
  LinearLayer v_proj;  // [C_kv, h*d_k]
  LinearLayer o_proj;  // [h*d_k, C_q]

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, std::size_t query_channels,
                     std::size_t kv_channels, std::size_t heads,
                     std::size_t head_dim_, Rng& rng)
      : num_heads(heads), head_dim(head_dim_) {
    if (heads == 0 || head_dim_ == 0)
      throw ConfigError("MultiHeadAttention " + name +
                        ": heads and head_dim must be positive");
    const std::size_t inner = heads * head_dim_;
    q_proj = LinearLayer(name + ".q", query_channels, inner, rng);
    k_proj = LinearLayer(name + ".k", kv_channels, inner, rng);
    v_proj = LinearLayer(name + ".v", kv_channels, inner, rng);
    o_proj = LinearLayer(name + ".o", inner, query_channels, rng);
  }

  std::size_t query_channels() const { return q_proj.in_features(); }
  std::size_t kv_channels() const { return k_proj.in_features(); }
  std::size_t parameter_count() const {
    return q_proj.parameter_count() + k_proj.parameter_count() +
           v_proj.parameter_count() + o_proj.parameter_count();
  }
  void collect(std::vector<Parameter*>& out) {
    q_proj.collect(out);
    k_proj.collect(out);
    v_proj.collect(out);
    o_proj.collect(out);
  }
};

// ---------------------------------------------------------------------------
// Scalar formulas shared by forward and backward.

inline double gelu_scalar(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  const double u = k * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_derivative(double x) {
  constexpr double k = 0.7978845608028654;
  const double u = k * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = k * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// ---------------------------------------------------------------------------
// Differentiable neural ops.

namespace ad {

inline Variable gelu(const Variable& x) {
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_scalar(xv[i]);
  Variable in[] = {x};
  return x.tape()->record(OpKind::kGelu, in, std::move(out),
                          [](BackwardContext& c) {
                            const Tensor& g = c.grad_output();
                            const Tensor& xi = c.input(0);
                            Tensor gx(xi.shape());
                            for (std::size_t i = 0; i < gx.size(); ++i)
                              gx[i] = g[i] * gelu_derivative(xi[i]);
                            c.accumulate(0, gx);
                          });
}

/// Row-wise normalization of x[L, C] followed by gamma * x_hat + beta.
inline Variable layer_norm(const Variable& x, const Variable& gamma,
                           const Variable& beta, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2)
    throw DimensionError("layer_norm: expected [L, C], got " +
                         xv.shape().to_string());
  const std::size_t rows = xv.dim(0), c = xv.dim(1);
  if (gamma.value().size() != c || beta.value().size() != c)
    throw DimensionError("layer_norm: affine parameters do not match " +
                         xv.shape().to_string());
  Tensor out(xv.shape());
  Tensor x_hat(xv.shape());
  std::vector<double> inv_std(rows);
  const Tensor& g = gamma.value();
  const Tensor& b = beta.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(c);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (in[j] - mean) * inv_std[r];
      x_hat[r * c + j] = h;
      out[r * c + j] = g[j] * h + b[j];
    }
  }
  Variable in[] = {x, gamma, beta};
  return x.tape()->record(
      OpKind::kLayerNorm, in, std::move(out),
      [x_hat = std::move(x_hat), inv_std = std::move(inv_std), rows,
       c](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        const Tensor& gam = ctx.input(1);
        if (ctx.needs_grad(0)) {
          Tensor gx(go.shape());
          const double n = static_cast<double>(c);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = go[r * c + j] * gam[j];
              mean_dh += dh;
              mean_dh_h += dh * x_hat[r * c + j];
            }
            mean_dh /= n;
            mean_dh_h /= n;
            for (std::size_t j = 0; j < c; ++j) {
              const double dh = go[r * c + j] * gam[j];
              gx[r * c + j] =
                  inv_std[r] * (dh - mean_dh - x_hat[r * c + j] * mean_dh_h);
            }
          }
          ctx.accumulate(0, gx);
        }
        if (ctx.needs_grad(1) || ctx.needs_grad(2)) {
          Tensor gg(Shape{c}), gb(Shape{c});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
              gg[j] += go[r * c + j] * x_hat[r * c + j];
              gb[j] += go[r * c + j];
            }
          ctx.accumulate(1, gg);
          ctx.accumulate(2, gb);
        }
      });
}

/// Mean over non-ignored rows of -log softmax(logits)[label].
inline Variable cross_entropy(const Variable& logits,
                              std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2)
    throw DimensionError("cross_entropy: expected logits [L, K], got " +
                         z.shape().to_string());
  const std::size_t rows = z.dim(0), k = z.dim(1);
  if (labels.size() != rows)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
  Tensor probs = umix::softmax_rows(z);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y == kIgnoreLabel) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw UsageError("cross_entropy: label " + std::to_string(y) +
                       " outside [0, " + std::to_string(k) + ")");
    // log-sum-exp form keeps the loss finite for saturated logits.
    const double* row = z.data().data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    total += std::log(s) + mx - row[y];
    ++counted;
  }
  if (counted == 0)
    throw UsageError("cross_entropy: every position is ignored");
  std::vector<int> owned(labels.begin(), labels.end());
  Variable in[] = {logits};
  return logits.tape()->record(
      OpKind::kCrossEntropy, in,
      Tensor::scalar(total / static_cast<double>(counted)),
      [probs = std::move(probs), owned = std::move(owned), counted, k,
       rows](BackwardContext& c) {
        const double scale = c.grad_output()[0] / static_cast<double>(counted);
        Tensor gx(probs.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          if (owned[r] == kIgnoreLabel) continue;
          for (std::size_t j = 0; j < k; ++j)
            gx[r * k + j] = probs[r * k + j] * scale;
          gx[r * k + static_cast<std::size_t>(owned[r])] -= scale;
        }
        c.accumulate(0, gx);
      });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Layer forwards.

/// Applies y = x W + b over all leading dimensions of x[..., C_in].
inline Variable linear_forward(Tape& tape, const Variable& x,
                               const LinearLayer& layer) {
  const Shape& s = x.shape();
  if (s.back() != layer.in_features())
    throw DimensionError("linear: input " + s.to_string() + " does not match " +
                         std::to_string(layer.in_features()) +
                         " input features");
  const std::size_t rows = x.value().size() / s.back();
  Variable flat = s.rank() == 2 ? x : ad::reshape(x, Shape{rows, s.back()});
  Variable y = ad::add_row(ad::matmul(flat, tape.bind(layer.weight)),
                           tape.bind(layer.bias));
  if (s.rank() == 2) return y;
  std::vector<std::size_t> dims = s.dims();
  dims.back() = layer.out_features();
  return ad::reshape(y, Shape(dims));
}

inline Variable layer_norm_forward(Tape& tape, const Variable& x,
                                   const LayerNormLayer& layer) {
  const Shape& s = x.shape();
  if (s.rank() == 2)
    return ad::layer_norm(x, tape.bind(layer.gamma), tape.bind(layer.beta),
                          layer.epsilon);
  const std::size_t rows = x.value().size() / s.back();
  Variable y = ad::layer_norm(ad::reshape(x, Shape{rows, s.back()}),
                              tape.bind(layer.gamma), tape.bind(layer.beta),
                              layer.epsilon);
  return ad::reshape(y, s);
}

inline Variable ffn_forward(Tape& tape, const Variable& x,
                            const FFNLayer& layer) {
  return linear_forward(
      tape, ad::gelu(linear_forward(tape, x, layer.fc1)), layer.fc2);
}

/// Per-head softmax matrices [L_q, L_kv] captured during a forward pass.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

/// Multi-head scaled dot-product attention of xq[L_q, C_q] over
/// xkv[L_kv, C_kv]; output is [L_q, C_q].
inline Variable attention_forward(Tape& tape, const Variable& xq,
                                  const Variable& xkv,
                                  const MultiHeadAttention& mha,
                                  AttentionTrace* trace = nullptr) {
  if (xq.shape().rank() != 2 || xkv.shape().rank() != 2)
    throw DimensionError("attention: expected flattened [L, C] inputs, got " +
                         xq.shape().to_string() + " and " +
                         xkv.shape().to_string());
  Variable q = linear_forward(tape, xq, mha.q_proj);
  Variable k = linear_forward(tape, xkv, mha.k_proj);
  Variable v = linear_forward(tape, xkv, mha.v_proj);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(mha.head_dim));
  std::vector<Variable> heads;
  heads.reserve(mha.num_heads);
  for (std::size_t h = 0; h < mha.num_heads; ++h) {
    const std::size_t off = h * mha.head_dim;
    Variable qh = mha.num_heads == 1 ? q : ad::slice_channels(q, off, mha.head_dim);
    Variable kh = mha.num_heads == 1 ? k : ad::slice_channels(k, off, mha.head_dim);
    Variable vh = mha.num_heads == 1 ? v : ad::slice_channels(v, off, mha.head_dim);
    Variable scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dk);
    Variable weights = ad::softmax_rows(scores);
    if (trace) trace->weights.push_back(weights.value());
    heads.push_back(ad::matmul(weights, vh));
  }
  Variable merged = heads.size() == 1 ? heads[0] : ad::concat_channels(heads);
  return linear_forward(tape, merged, mha.o_proj);
}

/// Average-pools f[H, W, C] with kernel = stride = pr (skipped for pr = 1)
/// and applies a channel-preserving linear layer.
inline Variable spatial_reduce(Tape& tape, const Variable& f, std::size_t pr,
                               const LinearLayer& layer) {
  if (pr == 0) throw ConfigError("spatial_reduce: pooling ratio must be >= 1");
  if (f.shape().rank() != 3)
    throw DimensionError("spatial_reduce: expected [H, W, C], got " +
                         f.shape().to_string());
  if (layer.in_features() != f.shape()[2] ||
      layer.out_features() != f.shape()[2])
    throw DimensionError("spatial_reduce: layer " +
                         std::to_string(layer.in_features()) + "->" +
                         std::to_string(layer.out_features()) +
                         " is not channel-preserving for " +
                         f.shape().to_string());
  Variable pooled = pr == 1 ? f : ad::avg_pool(f, pr, pr);
  return linear_forward(tape, pooled, layer);
}

}  // namespace umix
