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

// Parameter counting and an analytic FLOP model for one forward pass.
//
// FLOP conventions (all in one place so reports stay comparable):
//   matmul [M,K]x[K,P]      2*M*K*P
//   bias add                1 per output element
//   softmax (incl. scaling) 5 per score element
//   average pooling         1 per input element
//   layer norm              8 per element
//   GELU                    8 per element
//   residual add            1 per element
//   bilinear resize         9 per output element (three lerps)
// Reshapes, concatenations and space-to-channel moves are free.

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "umix/config.hpp"
#include "umix/decoder.hpp"
#include "umix/model.hpp"

namespace umix {

namespace flop_cost {
inline constexpr std::uint64_t kPerMultiplyAdd = 2;
inline constexpr std::uint64_t kBiasPerElement = 1;
inline constexpr std::uint64_t kSoftmaxPerElement = 5;
inline constexpr std::uint64_t kPoolPerElement = 1;
inline constexpr std::uint64_t kNormPerElement = 8;
inline constexpr std::uint64_t kGeluPerElement = 8;
inline constexpr std::uint64_t kResidualPerElement = 1;
inline constexpr std::uint64_t kBilinearPerElement = 9;
}  // namespace flop_cost

inline std::uint64_t matmul_flops(std::uint64_t m, std::uint64_t k,
                                  std::uint64_t p) {
  return flop_cost::kPerMultiplyAdd * m * k * p;
}

inline std::uint64_t linear_flops(std::uint64_t rows, std::uint64_t in,
                                  std::uint64_t out) {
  return matmul_flops(rows, in, out) + flop_cost::kBiasPerElement * rows * out;
}

struct CostEntry {
  std::string module;  // "encoder", "decoder.stage<i>", "head"
  std::string layer;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  bool kv_path = false;  // scales with the key/value sequence
};

struct CostReport {
  std::vector<CostEntry> entries;

  std::uint64_t total_params() const {
    std::uint64_t s = 0;
    for (const auto& e : entries) s += e.params;
    return s;
  }
  std::uint64_t total_flops() const {
    std::uint64_t s = 0;
    for (const auto& e : entries) s += e.flops;
    return s;
  }
  std::uint64_t module_params(const std::string& prefix) const {
    std::uint64_t s = 0;
    for (const auto& e : entries)
      if (e.module.starts_with(prefix)) s += e.params;
    return s;
  }
  std::uint64_t module_flops(const std::string& prefix) const {
    std::uint64_t s = 0;
    for (const auto& e : entries)
      if (e.module.starts_with(prefix)) s += e.flops;
    return s;
  }
  /// Key/value assembly, K/V projections and attention score/mixing cost.
  std::uint64_t kv_path_flops() const {
    std::uint64_t s = 0;
    for (const auto& e : entries)
      if (e.kv_path) s += e.flops;
    return s;
  }
  std::vector<std::string> modules() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (out.empty() || out.back() != e.module) out.push_back(e.module);
    return out;
  }
};

/// Walks the model's layers; totals equal the number of trainable scalars.
inline CostReport count_params(const Model& model) {
  CostReport r;
  const auto& enc = model.encoder().stages();
  for (std::size_t j = 0; j < enc.size(); ++j) {
    const std::string p = "stage" + std::to_string(j + 1);
    r.entries.push_back({"encoder", p + ".patch", enc[j].patch.parameter_count()});
    for (std::size_t b = 0; b < enc[j].blocks.size(); ++b) {
      const auto& blk = enc[j].blocks[b];
      const std::string bp = p + ".block" + std::to_string(b + 1);
      r.entries.push_back({"encoder", bp + ".norm", blk.norm.parameter_count()});
      r.entries.push_back({"encoder", bp + ".fc1", blk.fc1.parameter_count()});
      r.entries.push_back({"encoder", bp + ".fc2", blk.fc2.parameter_count()});
    }
  }
  for (const DecoderStage& s : model.decoder().stages()) {
    const std::string m = "decoder.stage" + std::to_string(s.index());
    for (std::size_t j = 0; j < s.reduce.size(); ++j)
      r.entries.push_back(
          {m, "kv.reduce" + std::to_string(j + 1), s.reduce[j].parameter_count()});
    if (s.midpoint_reduce)
      r.entries.push_back({m, "kv.reduce_mid", s.midpoint_reduce->parameter_count()});
    r.entries.push_back({m, "norm_q", s.norm_q.parameter_count()});
    r.entries.push_back({m, "norm_kv", s.norm_kv.parameter_count()});
    r.entries.push_back({m, "attn.q_proj", s.attn.q_proj.parameter_count()});
    r.entries.push_back({m, "attn.k_proj", s.attn.k_proj.parameter_count()});
    r.entries.push_back({m, "attn.v_proj", s.attn.v_proj.parameter_count()});
    r.entries.push_back({m, "attn.o_proj", s.attn.o_proj.parameter_count()});
    r.entries.push_back({m, "norm_out", s.norm_out.parameter_count()});
    r.entries.push_back({m, "ffn", s.ffn.parameter_count()});
  }
  r.entries.push_back({"head", "fc1", model.head().fc1.parameter_count()});
  r.entries.push_back({"head", "fc2", model.head().fc2.parameter_count()});
  return r;
}

/// Analytic parameter and FLOP model for an input of input_h x input_w.
inline CostReport count_flops(const ModelConfig& c, std::size_t input_h,
                              std::size_t input_w) {
  c.validate();
  ModelConfig at = c;
  at.img_h = input_h;
  at.img_w = input_w;
  at.validate();
  using flop_cost::kGeluPerElement;
  using flop_cost::kNormPerElement;
  using flop_cost::kResidualPerElement;
  const std::uint64_t n = c.num_stages;
  auto tokens = [&](std::size_t j) -> std::uint64_t {
    return static_cast<std::uint64_t>(at.stage_h(j)) * at.stage_w(j);
  };
  auto lin_params = [](std::uint64_t in, std::uint64_t out) {
    return in * out + out;
  };

  CostReport r;
  // Encoder.
  std::uint64_t in_c = 3;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::string p = "stage" + std::to_string(j);
    const std::uint64_t cj = c.stage_channels(j), l = tokens(j);
    const std::uint64_t f = j == 1 ? 4 : 2;
    r.entries.push_back({"encoder", p + ".patch", lin_params(f * f * in_c, cj),
                         linear_flops(l, f * f * in_c, cj)});
    const std::uint64_t hid = c.ffn_ratio * cj;
    for (std::size_t b = 0; b < c.depths[j - 1]; ++b) {
      const std::string bp = p + ".block" + std::to_string(b + 1);
      r.entries.push_back({"encoder", bp + ".norm", 2 * cj, kNormPerElement * l * cj});
      r.entries.push_back({"encoder", bp + ".fc1", lin_params(cj, hid),
                           linear_flops(l, cj, hid) + kGeluPerElement * l * hid});
      r.entries.push_back({"encoder", bp + ".fc2", lin_params(hid, cj),
                           linear_flops(l, hid, cj) + kResidualPerElement * l * cj});
    }
    in_c = cj;
  }

  // Decoder stages.
  for (std::size_t i = 1; i <= n; ++i) {
    const std::string m = "decoder.stage" + std::to_string(i);
    const std::size_t qs = c.lateral_stage(i);
    const std::uint64_t cq = c.stage_channels(qs), lq = tokens(qs);
    const std::uint64_t ckv = kv_channels(c, i);
    std::uint64_t lkv = 0;
    switch (c.attention_variant) {
      case AttentionVariant::kMix: {
        lkv = tokens(n);
        for (std::size_t j = 1; j < n; ++j) {
          const std::uint64_t cj = c.stage_channels(j);
          const std::uint64_t pool =
              flop_cost::kPoolPerElement * tokens(j) * cj;
          r.entries.push_back({m, "kv.reduce" + std::to_string(j),
                               lin_params(cj, cj),
                               pool + linear_flops(lkv, cj, cj), true});
        }
        if (c.plus_midpoint) {
          const std::uint64_t c3 = c.stage_channels(3);
          const std::uint64_t pool = n == 3 ? 0 : tokens(3) * c3;
          r.entries.push_back({m, "kv.reduce_mid", lin_params(c3, c3),
                               pool + linear_flops(lkv, c3, c3), true});
        }
        break;
      }
      case AttentionVariant::kCrossLowest:
        lkv = (c.propagate && i >= 2) ? tokens(n - i + 2) : tokens(1);
        break;
      case AttentionVariant::kSelf:
        lkv = lq;
        break;
    }
    const std::uint64_t h = c.num_heads(i), dk = c.head_dim(i);
    const std::uint64_t inner = h * dk;
    r.entries.push_back({m, "norm_q", 2 * cq, kNormPerElement * lq * cq});
    r.entries.push_back({m, "norm_kv", 2 * ckv, kNormPerElement * lkv * ckv, true});
    r.entries.push_back({m, "attn.q_proj", lin_params(cq, inner), linear_flops(lq, cq, inner)});
    r.entries.push_back({m, "attn.k_proj", lin_params(ckv, inner), linear_flops(lkv, ckv, inner), true});
    r.entries.push_back({m, "attn.v_proj", lin_params(ckv, inner), linear_flops(lkv, ckv, inner), true});
    r.entries.push_back({m, "attn.scores", 0, h * matmul_flops(lq, dk, lkv), true});
    r.entries.push_back({m, "attn.softmax", 0, h * flop_cost::kSoftmaxPerElement * lq * lkv, true});
    r.entries.push_back({m, "attn.weighted_sum", 0, h * matmul_flops(lq, lkv, dk), true});
    r.entries.push_back({m, "attn.o_proj", lin_params(inner, cq), linear_flops(lq, inner, cq)});
    r.entries.push_back({m, "norm_out", 2 * cq,
                         kResidualPerElement * lq * cq + kNormPerElement * lq * cq});
    const std::uint64_t hid = c.ffn_ratio * cq;
    r.entries.push_back({m, "ffn", lin_params(cq, hid) + lin_params(hid, cq),
                         linear_flops(lq, cq, hid) + kGeluPerElement * lq * hid +
                             linear_flops(lq, hid, cq) +
                             kResidualPerElement * lq * cq});
  }

  // Head.
  const std::uint64_t l1 = tokens(1);
  std::uint64_t resize = 0;
  for (std::size_t j = 2; j <= n; ++j)
    resize += flop_cost::kBilinearPerElement * l1 * c.stage_channels(j);
  if (n > 1) r.entries.push_back({"head", "upsample", 0, resize});
  const std::uint64_t total_c = c.total_channels();
  r.entries.push_back({"head", "fc1", lin_params(total_c, c.head_embed_dim),
                       linear_flops(l1, total_c, c.head_embed_dim) +
                           kGeluPerElement * l1 * c.head_embed_dim});
  r.entries.push_back({"head", "fc2", lin_params(c.head_embed_dim, c.num_classes),
                       linear_flops(l1, c.head_embed_dim, c.num_classes)});
  return r;
}

/// One `key=value` record per line.
inline void write_report(std::ostream& os, const CostReport& r,
                         bool per_layer = true) {
  if (per_layer)
    for (const auto& e : r.entries)
      os << "layer module=" << e.module << " name=" << e.layer
         << " params=" << e.params << " flops=" << e.flops << '\n';
  for (const auto& m : r.modules())
    os << "module name=" << m << " params=" << r.module_params(m)
       << " flops=" << r.module_flops(m) << '\n';
  os << "total params=" << r.total_params() << " flops=" << r.total_flops()
     << " kv_path_flops=" << r.kv_path_flops() << '\n';
}

}  // namespace umix
