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

// A small hierarchical encoder that produces the H/2^{j+1} x W/2^{j+1} x C_j
// feature ladder. Each stage merges patches (space-to-channel + linear) and
// then runs a few pre-norm residual MLP blocks.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/config.hpp"
#include "umix/nn.hpp"

namespace umix {

enum class FeatureOrigin { kEncoder, kDecoder, kEncoderMidpoint };

inline std::string to_string(FeatureOrigin o) {
  switch (o) {
    case FeatureOrigin::kEncoder: return "encoder";
    case FeatureOrigin::kDecoder: return "decoder";
    case FeatureOrigin::kEncoderMidpoint: return "encoder-midpoint";
  }
  return "encoder";
}

/// An [H, W, C] feature tagged with its 1-based stage and where it came from.
struct FeatureMap {
  Variable tensor;
  std::size_t stage = 0;
  FeatureOrigin origin = FeatureOrigin::kEncoder;

  std::size_t height() const { return tensor.shape()[0]; }
  std::size_t width() const { return tensor.shape()[1]; }
  std::size_t channels() const { return tensor.shape()[2]; }
};

struct EncoderOutput {
  std::vector<FeatureMap> features;  // E_1..E_N
  std::optional<FeatureMap> midpoint;
};

struct EncoderBlock {
  LayerNormLayer norm;
  LinearLayer fc1;
  LinearLayer fc2;
};

struct EncoderStage {
  std::size_t merge_factor = 2;
  LinearLayer patch;
  std::vector<EncoderBlock> blocks;
};

class StubEncoder {
 public:
  StubEncoder() = default;
  StubEncoder(const ModelConfig& config, Rng& rng) {
    std::size_t in_channels = 3;
    for (std::size_t j = 1; j <= config.num_stages; ++j) {
      const std::string name = "encoder.stage" + std::to_string(j);
      EncoderStage st;
      st.merge_factor = j == 1 ? 4 : 2;
      const std::size_t c = config.stage_channels(j);
      st.patch = LinearLayer(name + ".patch",
                             st.merge_factor * st.merge_factor * in_channels, c,
                             rng);
      for (std::size_t b = 0; b < config.depths[j - 1]; ++b) {
        const std::string bn = name + ".block" + std::to_string(b + 1);
        st.blocks.push_back(EncoderBlock{
            LayerNormLayer(bn + ".norm", c),
            LinearLayer(bn + ".fc1", c, config.ffn_ratio * c, rng),
            LinearLayer(bn + ".fc2", config.ffn_ratio * c, c, rng)});
      }
      stages_.push_back(std::move(st));
      in_channels = c;
    }
  }

  const std::vector<EncoderStage>& stages() const { return stages_; }

  /// Blocks of stage 3 run before the midpoint feature is captured.
  static std::size_t midpoint_blocks(std::size_t depth) {
    return (depth + 1) / 2;
  }

  /// image: [H, W, 3] with H and W divisible by 2^{N+1}.
  EncoderOutput encode(Tape& tape, const Variable& image) const {
    const Shape& s = image.shape();
    if (s.rank() != 3 || s[2] != 3)
      throw DimensionError("encode: expected an [H, W, 3] image, got " +
                           s.to_string());
    const std::size_t div = std::size_t{1} << (stages_.size() + 1);
    if (s[0] % div || s[1] % div)
      throw ConfigError("encode: image " + s.to_string() +
                        " is not divisible by " + std::to_string(div));

    EncoderOutput out;
    Variable x = image;
    for (std::size_t j = 1; j <= stages_.size(); ++j) {
      auto scope = tape.scope("encoder.stage" + std::to_string(j));
      const EncoderStage& st = stages_[j - 1];
      Variable merged = ad::pixel_unshuffle(x, st.merge_factor);
      const std::size_t h = merged.shape()[0], w = merged.shape()[1];
      const std::size_t c = st.patch.out_features();
      Variable tokens = linear_forward(
          tape, ad::reshape(merged, Shape{h * w, merged.shape()[2]}), st.patch);
      const std::size_t mid = midpoint_blocks(st.blocks.size());
      for (std::size_t b = 0; b < st.blocks.size(); ++b) {
        if (j == 3 && b == mid) out.midpoint = capture(tokens, h, w, c, j);
        const EncoderBlock& blk = st.blocks[b];
        Variable y = layer_norm_forward(tape, tokens, blk.norm);
        y = linear_forward(tape, ad::gelu(linear_forward(tape, y, blk.fc1)),
                           blk.fc2);
        tokens = ad::add(tokens, y);
      }
      if (j == 3 && mid == st.blocks.size())
        out.midpoint = capture(tokens, h, w, c, j);
      x = ad::reshape(tokens, Shape{h, w, c});
      out.features.push_back(FeatureMap{x, j, FeatureOrigin::kEncoder});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& st : stages_) {
      n += st.patch.parameter_count();
      for (const auto& b : st.blocks)
        n += b.norm.parameter_count() + b.fc1.parameter_count() +
             b.fc2.parameter_count();
    }
    return n;
  }

  void collect(std::vector<Parameter*>& out) {
    for (auto& st : stages_) {
      st.patch.collect(out);
      for (auto& b : st.blocks) {
        b.norm.collect(out);
        b.fc1.collect(out);
        b.fc2.collect(out);
      }
    }
  }

 private:
  static FeatureMap capture(const Variable& tokens, std::size_t h,
                            std::size_t w, std::size_t c, std::size_t stage) {
    return FeatureMap{ad::reshape(tokens, Shape{h, w, c}), stage,
                      FeatureOrigin::kEncoderMidpoint};
  }

  std::vector<EncoderStage> stages_;
};

}  // namespace umix
