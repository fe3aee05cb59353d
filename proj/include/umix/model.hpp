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

#include <cstdint>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/config.hpp"
#include "umix/decoder.hpp"
#include "umix/encoder.hpp"

namespace umix {

/// Encoder stub + U-MixFormer decoder + segmentation head.
class Model {
 public:
  struct Outputs {
    EncoderOutput encoder;
    DecoderOutput decoder;
    Variable logits;  // [H/4, W/4, K]
  };

  Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    encoder_ = StubEncoder(config_, rng);
    decoder_ = UMixDecoder(config_, rng);
    head_ = SegmentationHead(config_, rng);
  }

  const ModelConfig& config() const { return config_; }
  const StubEncoder& encoder() const { return encoder_; }
  const UMixDecoder& decoder() const { return decoder_; }
  const SegmentationHead& head() const { return head_; }
  StubEncoder& encoder() { return encoder_; }
  UMixDecoder& decoder() { return decoder_; }
  SegmentationHead& head() { return head_; }

  Outputs forward(Tape& tape, const Variable& image,
                  std::vector<AttentionTrace>* traces = nullptr) const {
    Outputs out;
    out.encoder = encoder_.encode(tape, image);
    out.decoder = decoder_.forward(tape, out.encoder, traces);
    out.logits = head_.forward(tape, out.decoder.features);
    return out;
  }

  /// Every trainable tensor, in a fixed order (encoder, decoder, head).
  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps;
    encoder_.collect(ps);
    decoder_.collect(ps);
    head_.collect(ps);
    return ps;
  }

  std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  std::size_t parameter_count() const {
    return encoder_.parameter_count() + decoder_.parameter_count() +
           head_.parameter_count();
  }

 private:
  ModelConfig config_;
  StubEncoder encoder_;
  UMixDecoder decoder_;
  SegmentationHead head_;
};

}  // namespace umix
