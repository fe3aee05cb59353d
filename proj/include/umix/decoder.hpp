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

// U-Net style transformer decoder with mix-attention.
//
// Decoder stage i (1-based, i = 1..N) takes the lateral encoder feature
// E_{N-i+1} as its query and produces D_{N-i+1} with the same shape. Its keys
// and values come from a mixed feature set: stage 1 sees E_1..E_N, later
// stages replace E_j by the already computed D_j for j > N-i+1. Every member
// except the last is average-pooled down to the smallest resolution and
// linearly projected, then everything is concatenated along channels.
//
// Two baselines share the same stage structure: cross-attention over the
// lowest-level encoder feature only, and self-attention over the query.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/config.hpp"
#include "umix/encoder.hpp"
#include "umix/errors.hpp"
#include "umix/nn.hpp"

namespace umix {

/// Ordered key/value sources F^i of decoder stage i; items[j-1] has stage j.
struct FeatureSet {
  std::size_t consumer_stage = 0;
  std::vector<FeatureMap> items;
};

/// Feature-set selection for decoder stage i:
///   i = 1:  E_1 .. E_N
///   i >= 2: E_1 .. E_{N-i+1}, D_{N-i+2} .. D_N
/// `decoded[j-1]` holds D_j once it has been produced. With
/// `propagate == false` every stage sees the encoder features only.
inline FeatureSet select_feature_set(
    std::span<const FeatureMap> encoder,
    std::span<const std::optional<FeatureMap>> decoded, std::size_t i,
    bool propagate = true) {
  const std::size_t n = encoder.size();
  if (i < 1 || i > n)
    throw UsageError("select_feature_set: stage " + std::to_string(i) +
                     " outside 1.." + std::to_string(n));
  FeatureSet fs;
  fs.consumer_stage = i;
  const std::size_t last_encoder = (i == 1 || !propagate) ? n : n - i + 1;
  for (std::size_t j = 1; j <= n; ++j) {
    if (j <= last_encoder) {
      fs.items.push_back(encoder[j - 1]);
      continue;
    }
    if (j - 1 >= decoded.size() || !decoded[j - 1])
      throw SequencingError("decoder stage " + std::to_string(i) +
                            " needs D_" + std::to_string(j) +
                            ", which has not been produced yet");
    fs.items.push_back(*decoded[j - 1]);
  }
  return fs;
}

/// Pooling ratio aligning stage j with stage n on the 2^{j+1} ladder.
inline std::size_t pooling_ratio(std::size_t j, std::size_t n) {
  return std::size_t{1} << (n - j);
}

inline Variable flatten_tokens(const Variable& f) {
  const Shape& s = f.shape();
  return ad::reshape(f, Shape{s[0] * s[1], s[2]});
}

/// Channel width of the key/value input of decoder stage i.
inline std::size_t kv_channels(const ModelConfig& c, std::size_t i) {
  switch (c.attention_variant) {
    case AttentionVariant::kMix:
      return c.total_channels() + (c.plus_midpoint ? c.stage_channels(3) : 0);
    case AttentionVariant::kCrossLowest:
      return (c.propagate && i >= 2) ? c.stage_channels(c.num_stages - i + 2)
                                     : c.stage_channels(1);
    case AttentionVariant::kSelf:
      return c.stage_channels(c.lateral_stage(i));
  }
  return 0;
}

class DecoderStage {
 public:
  DecoderStage() = default;
  DecoderStage(const ModelConfig& c, std::size_t i, Rng& rng)
      : index_(i), num_stages_(c.num_stages), query_stage_(c.lateral_stage(i)) {
    const std::string name = "decoder.stage" + std::to_string(i);
    const std::size_t cq = c.stage_channels(query_stage_);
    const std::size_t ckv = kv_channels(c, i);
    norm_q = LayerNormLayer(name + ".norm_q", cq);
    norm_kv = LayerNormLayer(name + ".norm_kv", ckv);
    attn = MultiHeadAttention(name + ".attn", cq, ckv, c.num_heads(i),
                              c.head_dim(i), rng);
    norm_out = LayerNormLayer(name + ".norm_out", cq);
    ffn = FFNLayer(name + ".ffn", cq, c.ffn_ratio, rng);
    if (c.attention_variant == AttentionVariant::kMix) {
      for (std::size_t j = 1; j < c.num_stages; ++j) {
        const std::size_t cj = c.stage_channels(j);
        reduce.emplace_back(name + ".reduce" + std::to_string(j), cj, cj, rng);
      }
      if (c.plus_midpoint) {
        const std::size_t c3 = c.stage_channels(3);
        midpoint_reduce.emplace(name + ".reduce_mid", c3, c3, rng);
      }
    }
  }

  std::size_t index() const { return index_; }
  std::size_t query_stage() const { return query_stage_; }

  /// Spatially aligns and concatenates a feature set into X_kv [L_N, sum C_j].
  /// The optional midpoint is reduced like stage 3 and placed right after it.
  Variable assemble_kv(Tape& tape, const FeatureSet& fs,
                       const FeatureMap* midpoint = nullptr) const {
    const std::size_t n = fs.items.size();
    if (n != num_stages_ || reduce.size() + 1 != n)
      throw DimensionError("assemble_kv: feature set has " + std::to_string(n) +
                           " members, stage expects " +
                           std::to_string(num_stages_));
    const FeatureMap& smallest = fs.items.back();
    for (std::size_t j = 1; j <= n; ++j) {
      const FeatureMap& f = fs.items[j - 1];
      const std::size_t pr = pooling_ratio(j, n);
      if (f.stage != j || f.height() != smallest.height() * pr ||
          f.width() != smallest.width() * pr)
        throw DimensionError(
            "assemble_kv: member " + std::to_string(j) + " (stage " +
            std::to_string(f.stage) + ", " + f.tensor.shape().to_string() +
            ") violates the resolution ladder");
    }
    if (midpoint && !midpoint_reduce)
      throw ConfigError("assemble_kv: midpoint given but stage has no "
                        "midpoint reduction layer");
    if (!midpoint && midpoint_reduce)
      throw ConfigError("assemble_kv: stage expects a stage-3 midpoint feature");

    auto scope = tape.scope("kv");
    std::vector<Variable> parts;
    for (std::size_t j = 1; j <= n; ++j) {
      const FeatureMap& f = fs.items[j - 1];
      if (j < n)
        parts.push_back(flatten_tokens(
            spatial_reduce(tape, f.tensor, pooling_ratio(j, n), reduce[j - 1])));
      else
        parts.push_back(flatten_tokens(f.tensor));
      if (midpoint && j == 3) {
        const FeatureMap& m = *midpoint;
        if (m.height() != fs.items[2].height() ||
            m.width() != fs.items[2].width() ||
            m.channels() != midpoint_reduce->in_features())
          throw ConfigError("assemble_kv: midpoint " +
                            m.tensor.shape().to_string() +
                            " does not match stage 3");
        parts.push_back(flatten_tokens(spatial_reduce(
            tape, m.tensor, pooling_ratio(3, n), *midpoint_reduce)));
      }
    }
    return ad::concat_channels(parts);
  }

  /// LN_q(X_q) and LN_kv(X_kv) feed the attention; the attention output plus
  /// LN_q(X_q) is normalized again (A), and D = FFN(A) + A.
  FeatureMap forward(Tape& tape, const FeatureMap& xq, const Variable& xkv,
                     AttentionTrace* trace = nullptr) const {
    if (xq.tensor.shape().rank() != 3 ||
        xq.channels() != attn.query_channels())
      throw DimensionError("decoder stage " + std::to_string(index_) +
                           ": query " + xq.tensor.shape().to_string() +
                           " does not match " +
                           std::to_string(attn.query_channels()) + " channels");
    if (xkv.shape().rank() != 2 || xkv.shape()[1] != attn.kv_channels())
      throw DimensionError("decoder stage " + std::to_string(index_) +
                           ": key/value input " + xkv.shape().to_string() +
                           " does not match " +
                           std::to_string(attn.kv_channels()) + " channels");
    auto scope = tape.scope("decoder.stage" + std::to_string(index_));
    Variable q_tokens = flatten_tokens(xq.tensor);
    Variable q = layer_norm_forward(tape, q_tokens, norm_q);
    Variable kv = layer_norm_forward(tape, xkv, norm_kv);
    Variable mixed = attention_forward(tape, q, kv, attn, trace);
    Variable a = layer_norm_forward(tape, ad::add(mixed, q), norm_out);
    Variable d = ad::add(ffn_forward(tape, a, ffn), a);
    return FeatureMap{ad::reshape(d, xq.tensor.shape()), query_stage_,
                      FeatureOrigin::kDecoder};
  }

  std::size_t parameter_count() const {
    std::size_t n = norm_q.parameter_count() + norm_kv.parameter_count() +
                    norm_out.parameter_count() + attn.parameter_count() +
                    ffn.parameter_count();
    for (const auto& r : reduce) n += r.parameter_count();
    if (midpoint_reduce) n += midpoint_reduce->parameter_count();
    return n;
  }

  void collect(std::vector<Parameter*>& out) {
    norm_q.collect(out);
    norm_kv.collect(out);
    attn.collect(out);
    norm_out.collect(out);
    ffn.collect(out);
    for (auto& r : reduce) r.collect(out);
    if (midpoint_reduce) midpoint_reduce->collect(out);
  }

  LayerNormLayer norm_q;
  LayerNormLayer norm_kv;
  MultiHeadAttention attn;
  LayerNormLayer norm_out;
  FFNLayer ffn;
  std::vector<LinearLayer> reduce;  // stages 1..N-1 (mix variant only)
  std::optional<LinearLayer> midpoint_reduce;

 private:
  std::size_t index_ = 0;
  std::size_t num_stages_ = 0;
  std::size_t query_stage_ = 0;
};

struct DecoderOutput {
  std::vector<FeatureMap> features;        // D_1..D_N
  std::vector<std::size_t> emission_order;  // stage index of each output
};

class UMixDecoder {
 public:
  UMixDecoder() = default;
  UMixDecoder(const ModelConfig& c, Rng& rng) : config_(c) {
    for (std::size_t i = 1; i <= c.num_stages; ++i)
      stages_.emplace_back(c, i, rng);
  }

  const std::vector<DecoderStage>& stages() const { return stages_; }
  const DecoderStage& stage(std::size_t i) const { return stages_.at(i - 1); }

  /// Key/value input of decoder stage i given everything decoded so far.
  Variable key_values(Tape& tape, std::size_t i, const EncoderOutput& enc,
                      std::span<const std::optional<FeatureMap>> decoded) const {
    const ModelConfig& c = config_;
    check_encoder(enc);
    switch (c.attention_variant) {
      case AttentionVariant::kMix: {
        FeatureSet fs = select_feature_set(enc.features, decoded, i, c.propagate);
        if (c.plus_midpoint) {
          if (!enc.midpoint)
            throw ConfigError("plus_midpoint enabled but encoder produced no "
                              "stage-3 midpoint");
          return stage(i).assemble_kv(tape, fs, &*enc.midpoint);
        }
        return stage(i).assemble_kv(tape, fs);
      }
      case AttentionVariant::kCrossLowest: {
        if (c.propagate && i >= 2) {
          const std::size_t prev = c.num_stages - i + 2;
          if (prev - 1 >= decoded.size() || !decoded[prev - 1])
            throw SequencingError("decoder stage " + std::to_string(i) +
                                  " needs D_" + std::to_string(prev));
          return flatten_tokens(decoded[prev - 1]->tensor);
        }
        return flatten_tokens(enc.features.front().tensor);
      }
      case AttentionVariant::kSelf:
        return flatten_tokens(enc.features[c.lateral_stage(i) - 1].tensor);
    }
    throw ConfigError("unknown attention variant");
  }

  /// Runs decoder stage i and returns D_{N-i+1}.
  FeatureMap run_stage(Tape& tape, std::size_t i, const EncoderOutput& enc,
                       std::span<const std::optional<FeatureMap>> decoded,
                       AttentionTrace* trace = nullptr) const {
    Variable kv = key_values(tape, i, enc, decoded);
    return stage(i).forward(tape, enc.features[config_.lateral_stage(i) - 1],
                            kv, trace);
  }

  /// Stages run in order i = 1..N, emitting D_N, ..., D_1.
  DecoderOutput forward(Tape& tape, const EncoderOutput& enc,
                        std::vector<AttentionTrace>* traces = nullptr) const {
    const std::size_t n = config_.num_stages;
    std::vector<std::optional<FeatureMap>> decoded(n);
    DecoderOutput out;
    if (traces) traces->assign(n, AttentionTrace{});
    for (std::size_t i = 1; i <= n; ++i) {
      FeatureMap d = run_stage(tape, i, enc, decoded,
                               traces ? &(*traces)[i - 1] : nullptr);
      out.emission_order.push_back(d.stage);
      decoded[d.stage - 1] = d;
    }
    for (auto& d : decoded) out.features.push_back(*d);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : stages_) n += s.parameter_count();
    return n;
  }

  void collect(std::vector<Parameter*>& out) {
    for (auto& s : stages_) s.collect(out);
  }

 private:
  void check_encoder(const EncoderOutput& enc) const {
    const ModelConfig& c = config_;
    if (enc.features.size() != c.num_stages)
      throw DimensionError("decoder expects " + std::to_string(c.num_stages) +
                           " encoder features, got " +
                           std::to_string(enc.features.size()));
    const FeatureMap& last = enc.features.back();
    for (std::size_t j = 1; j <= c.num_stages; ++j) {
      const FeatureMap& f = enc.features[j - 1];
      const std::size_t pr = pooling_ratio(j, c.num_stages);
      if (f.stage != j || f.channels() != c.stage_channels(j) ||
          f.height() != last.height() * pr || f.width() != last.width() * pr)
        throw DimensionError("encoder feature " + std::to_string(j) + " " +
                             f.tensor.shape().to_string() +
                             " violates the stage ladder");
    }
  }

  ModelConfig config_;
  std::vector<DecoderStage> stages_;
};

/// Upsamples D_2..D_N to D_1's resolution, concatenates channels and applies
/// Linear -> GELU -> Linear to produce per-pixel class logits.
struct SegmentationHead {
  LinearLayer fc1;
  LinearLayer fc2;

  SegmentationHead() = default;
  SegmentationHead(const ModelConfig& c, Rng& rng)
      : fc1("head.fc1", c.total_channels(), c.head_embed_dim, rng),
        fc2("head.fc2", c.head_embed_dim, c.num_classes, rng) {}

  Variable forward(Tape& tape, std::span<const FeatureMap> decoded) const {
    if (decoded.empty()) throw DimensionError("segmentation head: no features");
    auto scope = tape.scope("head");
    const std::size_t h = decoded[0].height(), w = decoded[0].width();
    std::vector<Variable> parts;
    for (const FeatureMap& d : decoded) {
      if (d.height() == h && d.width() == w)
        parts.push_back(d.tensor);
      else
        parts.push_back(ad::bilinear_upsample(d.tensor, h, w));
    }
    Variable x = parts.size() == 1 ? parts[0] : ad::concat_channels(parts);
    Variable tokens = flatten_tokens(x);
    Variable logits = linear_forward(
        tape, ad::gelu(linear_forward(tape, tokens, fc1)), fc2);
    return ad::reshape(logits, Shape{h, w, fc2.out_features()});
  }

  std::size_t parameter_count() const {
    return fc1.parameter_count() + fc2.parameter_count();
  }
  void collect(std::vector<Parameter*>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

}  // namespace umix
