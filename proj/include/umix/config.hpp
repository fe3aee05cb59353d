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

#pragma once

#include <cstddef>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "umix/errors.hpp"
#include "umix/nn.hpp"

namespace umix {

enum class AttentionVariant {
  kMix,          // keys/values from a mix of encoder and decoder stages
  kCrossLowest,  // keys/values from the lowest-level encoder feature only
  kSelf,         // keys/values from the query feature itself
};

inline std::string to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::kMix: return "mix";
    case AttentionVariant::kCrossLowest: return "cross-lowest";
    case AttentionVariant::kSelf: return "self";
  }
  return "mix";
}

inline AttentionVariant parse_attention_variant(const std::string& s) {
  if (s == "mix") return AttentionVariant::kMix;
  if (s == "cross-lowest") return AttentionVariant::kCrossLowest;
  if (s == "self") return AttentionVariant::kSelf;
  throw ConfigError("unknown attention_variant '" + s +
                    "' (expected mix, cross-lowest or self)");
}

/// Full architecture description. Stage indices in comments are 1-based;
/// vectors are indexed from 0.
struct ModelConfig {
  std::size_t num_stages = 4;
  std::size_t img_h = 64;
  std::size_t img_w = 64;
  std::vector<std::size_t> channels{8, 16, 32, 64};
  /// Residual blocks per encoder stage.
  std::vector<std::size_t> depths{1, 1, 2, 1};
  std::size_t num_classes = 4;
  /// Width of the hidden layer of the segmentation MLP.
  std::size_t head_embed_dim = 128;
  /// Attention heads of decoder stage i (1-based); empty selects the default
  /// max(1, C_q / 32) for every stage.
  std::vector<std::size_t> heads;
  std::size_t ffn_ratio = 4;
  AttentionVariant attention_variant = AttentionVariant::kMix;
  /// Feed earlier decoder outputs into later stages (U-Net propagation).
  bool propagate = true;
  /// Adds the stage-3 encoder midpoint as an extra key/value source.
  bool plus_midpoint = false;

  std::size_t stride(std::size_t stage) const {
    return std::size_t{1} << (stage + 1);
  }
  std::size_t stage_h(std::size_t stage) const { return img_h / stride(stage); }
  std::size_t stage_w(std::size_t stage) const { return img_w / stride(stage); }
  std::size_t stage_channels(std::size_t stage) const {
    return channels.at(stage - 1);
  }

  /// Query stage consumed by decoder stage i, i.e. N - i + 1.
  std::size_t lateral_stage(std::size_t decoder_stage) const {
    return num_stages - decoder_stage + 1;
  }

  std::size_t num_heads(std::size_t decoder_stage) const {
    if (!heads.empty()) return heads.at(decoder_stage - 1);
    return default_num_heads(stage_channels(lateral_stage(decoder_stage)));
  }

  std::size_t head_dim(std::size_t decoder_stage) const {
    const std::size_t cq = stage_channels(lateral_stage(decoder_stage));
    return std::max<std::size_t>(1, cq / num_heads(decoder_stage));
  }

  std::size_t total_channels() const {
    std::size_t s = 0;
    for (std::size_t c : channels) s += c;
    return s;
  }

  void validate() const {
    if (num_stages < 1 || num_stages > 6)
      throw ConfigError("num_stages must lie in 1..6");
    if (channels.size() != num_stages)
      throw ConfigError("channels must list " + std::to_string(num_stages) +
                        " entries");
    if (depths.size() != num_stages)
      throw ConfigError("depths must list " + std::to_string(num_stages) +
                        " entries");
    if (!heads.empty() && heads.size() != num_stages)
      throw ConfigError("heads must be empty or list " +
                        std::to_string(num_stages) + " entries");
    for (std::size_t h : heads)
      if (h == 0) throw ConfigError("heads entries must be >= 1");
    for (std::size_t c : channels)
      if (c < 2) throw ConfigError("every channel width must be >= 2");
    const std::size_t div = stride(num_stages);
    if (img_h == 0 || img_w == 0 || img_h % div || img_w % div)
      throw ConfigError("img_h and img_w (" + std::to_string(img_h) + "x" +
                        std::to_string(img_w) + ") must be divisible by " +
                        std::to_string(div));
    if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
    if (head_embed_dim < 1) throw ConfigError("head_embed_dim must be >= 1");
    if (ffn_ratio < 1) throw ConfigError("ffn_ratio must be >= 1");
    if (plus_midpoint) {
      if (num_stages < 3)
        throw ConfigError("plus_midpoint requires at least 3 stages");
      if (attention_variant != AttentionVariant::kMix)
        throw ConfigError("plus_midpoint requires attention_variant = mix");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"num_stages", c.num_stages},
      {"img_h", c.img_h},
      {"img_w", c.img_w},
      {"channels", c.channels},
      {"depths", c.depths},
      {"num_classes", c.num_classes},
      {"head_embed_dim", c.head_embed_dim},
      {"heads", c.heads},
      {"ffn_ratio", c.ffn_ratio},
      {"attention_variant", to_string(c.attention_variant)},
      {"propagate", c.propagate},
      {"plus_midpoint", c.plus_midpoint},
  };
}

/// Keys absent from `j` keep their defaults; unknown keys are rejected.
inline ModelConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "num_stages", "img_h",     "img_w",          "channels",
      "depths",     "num_classes", "head_embed_dim", "heads",
      "ffn_ratio",  "attention_variant", "propagate", "plus_midpoint"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : j.items())
    if (!kKeys.contains(item.key()))
      throw ConfigError("unknown config key '" + item.key() + "'");
  ModelConfig c;
  try {
    if (j.contains("num_stages")) c.num_stages = j.at("num_stages").get<std::size_t>();
    if (j.contains("img_h")) c.img_h = j.at("img_h").get<std::size_t>();
    if (j.contains("img_w")) c.img_w = j.at("img_w").get<std::size_t>();
    if (j.contains("channels"))
      c.channels = j.at("channels").get<std::vector<std::size_t>>();
    if (j.contains("depths"))
      c.depths = j.at("depths").get<std::vector<std::size_t>>();
    else if (c.depths.size() != c.num_stages)
      c.depths.assign(c.num_stages, 1);
    if (j.contains("num_classes"))
      c.num_classes = j.at("num_classes").get<std::size_t>();
    if (j.contains("head_embed_dim"))
      c.head_embed_dim = j.at("head_embed_dim").get<std::size_t>();
    if (j.contains("heads")) c.heads = j.at("heads").get<std::vector<std::size_t>>();
    if (j.contains("ffn_ratio")) c.ffn_ratio = j.at("ffn_ratio").get<std::size_t>();
    if (j.contains("attention_variant"))
      c.attention_variant =
          parse_attention_variant(j.at("attention_variant").get<std::string>());
    if (j.contains("propagate")) c.propagate = j.at("propagate").get<bool>();
    if (j.contains("plus_midpoint"))
      c.plus_midpoint = j.at("plus_midpoint").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config value: ") + e.what());
  }
  c.validate();
  return c;
}

inline ModelConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace umix
