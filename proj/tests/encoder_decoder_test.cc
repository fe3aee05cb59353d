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

#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "umix/gradcheck.hpp"
#include "umix/model.hpp"

namespace umix {
namespace {

std::string describe(const FeatureSet& fs) {
  std::string s;
  for (const FeatureMap& f : fs.items) {
    if (!s.empty()) s += ',';
    s += (f.origin == FeatureOrigin::kDecoder ? "D" : "E") + std::to_string(f.stage);
  }
  return s;
}

EncoderOutput encode(const Model& m, Tape& tape, std::uint64_t seed) {
  Rng rng(seed);
  const auto& c = m.config();
  return m.encoder().encode(
      tape, tape.constant(random_tensor(rng, Shape{c.img_h, c.img_w, 3})));
}

TEST(ConfigTest, ValidationErrors) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.img_h = 48;  // not divisible by 32
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.channels = {8, 16, 32};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.plus_midpoint = true;
  c.attention_variant = AttentionVariant::kCrossLowest;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.num_stages = 2;
  c.channels = {8, 16};
  c.depths = {1, 1};
  c.plus_midpoint = true;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigTest, JsonRoundTripAndUnknownKeys) {
  ModelConfig c;
  c.attention_variant = AttentionVariant::kCrossLowest;
  c.propagate = false;
  c.heads = {1, 1, 2, 2};
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_THROW(parse_config(R"({"num_stagez": 4})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"attention_variant": "sideways"})"), ConfigError);
  const ModelConfig three = parse_config(
      R"({"num_stages": 3, "channels": [4, 8, 16], "img_h": 32, "img_w": 32})");
  EXPECT_EQ(three.depths, (std::vector<std::size_t>{1, 1, 1}));
}

TEST(EncoderTest, StageLadderShapes) {
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 1);
  ASSERT_EQ(e.features.size(), 4u);
  const std::size_t channels[] = {8, 16, 32, 64};
  for (std::size_t j = 1; j <= 4; ++j) {
    const FeatureMap& f = e.features[j - 1];
    EXPECT_EQ(f.stage, j);
    EXPECT_EQ(f.tensor.shape(),
              (Shape{64u >> (j + 1), 64u >> (j + 1), channels[j - 1]}));
  }
  ASSERT_TRUE(e.midpoint.has_value());
  EXPECT_EQ(e.midpoint->tensor.shape(), e.features[2].tensor.shape());
  EXPECT_EQ(e.midpoint->origin, FeatureOrigin::kEncoderMidpoint);
}

TEST(EncoderTest, RejectsIndivisibleImages) {
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  EXPECT_THROW(m.encoder().encode(tape, tape.constant(Tensor(Shape{48, 64, 3}))),
               ConfigError);
  EXPECT_THROW(m.encoder().encode(tape, tape.constant(Tensor(Shape{64, 64, 1}))),
               DimensionError);
}

TEST(EncoderTest, MidpointSitsInsideStageThree) {
  EXPECT_EQ(StubEncoder::midpoint_blocks(1), 1u);
  EXPECT_EQ(StubEncoder::midpoint_blocks(2), 1u);
  EXPECT_EQ(StubEncoder::midpoint_blocks(3), 2u);
  // With two blocks the midpoint differs from the stage output.
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 2);
  EXPECT_FALSE(e.midpoint->tensor.value() == e.features[2].tensor.value());
}

TEST(FeatureSetTest, EnumerationForFourStages) {
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 3);
  std::vector<std::optional<FeatureMap>> decoded(4);
  for (std::size_t j = 1; j <= 4; ++j)
    decoded[j - 1] = FeatureMap{e.features[j - 1].tensor, j, FeatureOrigin::kDecoder};
  EXPECT_EQ(describe(select_feature_set(e.features, decoded, 1)), "E1,E2,E3,E4");
  EXPECT_EQ(describe(select_feature_set(e.features, decoded, 2)), "E1,E2,E3,D4");
  EXPECT_EQ(describe(select_feature_set(e.features, decoded, 3)), "E1,E2,D3,D4");
  EXPECT_EQ(describe(select_feature_set(e.features, decoded, 4)), "E1,D2,D3,D4");
  EXPECT_EQ(describe(select_feature_set(e.features, decoded, 4, false)),
            "E1,E2,E3,E4");
  EXPECT_THROW(select_feature_set(e.features, decoded, 5), UsageError);
}

TEST(FeatureSetTest, MissingDecoderOutputIsSequencingError) {
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 4);
  std::vector<std::optional<FeatureMap>> decoded(4);
  EXPECT_THROW(select_feature_set(e.features, decoded, 2), SequencingError);
  EXPECT_THROW(m.decoder().run_stage(tape, 3, e, decoded), SequencingError);
}

TEST(DecoderTest, OutputsMirrorEncoderShapesInReverseOrder) {
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 5);
  const DecoderOutput d = m.decoder().forward(tape, e);
  EXPECT_EQ(d.emission_order, (std::vector<std::size_t>{4, 3, 2, 1}));
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(d.features[j].tensor.shape(), e.features[j].tensor.shape());
    EXPECT_EQ(d.features[j].origin, FeatureOrigin::kDecoder);
  }
}

TEST(DecoderTest, KeyValueWidthsPerVariant) {
  ModelConfig c;
  EXPECT_EQ(kv_channels(c, 1), 120u);
  c.plus_midpoint = true;
  EXPECT_EQ(kv_channels(c, 2), 152u);
  c.plus_midpoint = false;
  c.attention_variant = AttentionVariant::kCrossLowest;
  EXPECT_EQ(kv_channels(c, 1), 8u);
  EXPECT_EQ(kv_channels(c, 2), 64u);  // D_4
  EXPECT_EQ(kv_channels(c, 4), 16u);  // D_2
  c.propagate = false;
  EXPECT_EQ(kv_channels(c, 4), 8u);
  c.attention_variant = AttentionVariant::kSelf;
  EXPECT_EQ(kv_channels(c, 1), 64u);
}

TEST(DecoderTest, MixKeyValueHasLowestResolutionTokens) {
  const Model m(ModelConfig{}, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 6);
  std::vector<std::optional<FeatureMap>> decoded(4);
  const Variable kv = m.decoder().key_values(tape, 1, e, decoded);
  EXPECT_EQ(kv.shape(), (Shape{4, 120}));
}

TEST(DecoderTest, CrossLowestUsesNativeResolution) {
  ModelConfig c;
  c.attention_variant = AttentionVariant::kCrossLowest;
  const Model m(c, 0);
  Tape tape(false);
  const EncoderOutput e = encode(m, tape, 7);
  std::vector<std::optional<FeatureMap>> decoded(4);
  EXPECT_EQ(m.decoder().key_values(tape, 1, e, decoded).shape(), (Shape{256, 8}));
  const DecoderOutput d = m.decoder().forward(tape, e);
  EXPECT_EQ(d.features[0].tensor.shape(), (Shape{16, 16, 8}));
}

TEST(DecoderTest, PropagationCouplesStages) {
  for (bool propagate : {true, false}) {
    ModelConfig c;
    c.propagate = propagate;
    const Model m(c, 0);
    Tape tape(false);
    const EncoderOutput e = encode(m, tape, 8);
    std::vector<std::optional<FeatureMap>> decoded(4);
    decoded[3] = m.decoder().run_stage(tape, 1, e, decoded);
    const Tensor d3 = m.decoder().run_stage(tape, 2, e, decoded).tensor.value();
    Tensor bumped = decoded[3]->tensor.value();
    bumped[0] += 0.5;
    decoded[3] = FeatureMap{tape.constant(bumped), 4, FeatureOrigin::kDecoder};
    const Tensor d3b = m.decoder().run_stage(tape, 2, e, decoded).tensor.value();
    EXPECT_EQ(d3 == d3b, !propagate) << "propagate=" << propagate;
  }
}

TEST(DecoderTest, MidpointWidensKeyValueAndIsIgnoredWhenDisabled) {
  ModelConfig plus;
  plus.plus_midpoint = true;
  const Model mp(plus, 0);
  EXPECT_EQ(mp.decoder().stage(1).attn.kv_channels(),
            plus.total_channels() + plus.stage_channels(3));
  Tape tape(false);
  const EncoderOutput e = encode(mp, tape, 9);
  std::vector<std::optional<FeatureMap>> decoded(4);
  EXPECT_EQ(mp.decoder().key_values(tape, 1, e, decoded).shape(),
            (Shape{4, 152}));
  // Removing the midpoint from the encoder output is reported, not ignored.
  EncoderOutput no_mid = e;
  no_mid.midpoint.reset();
  EXPECT_THROW(mp.decoder().key_values(tape, 1, no_mid, decoded), ConfigError);
}

TEST(ModelTest, LogitsAtQuarterResolution) {
  ModelConfig c;
  c.img_h = 64;
  c.img_w = 96;
  const Model m(c, 0);
  Tape tape(false);
  Rng rng(10);
  const auto out = m.forward(tape, tape.constant(random_tensor(rng, Shape{64, 96, 3})));
  EXPECT_EQ(out.logits.shape(), (Shape{16, 24, 4}));
  EXPECT_TRUE(out.logits.value().all_finite());
}

TEST(ModelTest, SameSeedSameParameters) {
  const Model a(ModelConfig{}, 11), b(ModelConfig{}, 11), d(ModelConfig{}, 12);
  const auto pa = a.parameters(), pb = b.parameters(), pd = d.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool all_equal = true, any_diff = false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    all_equal = all_equal && pa[k]->value == pb[k]->value;
    any_diff = any_diff || !(pa[k]->value == pd[k]->value);
  }
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff);
}

TEST(ModelTest, TapeLeafCountEqualsParameterCount) {
  for (AttentionVariant v : {AttentionVariant::kMix, AttentionVariant::kCrossLowest,
                             AttentionVariant::kSelf}) {
    ModelConfig c;
    c.attention_variant = v;
    const Model m(c, 0);
    Tape tape;
    Rng rng(12);
    m.forward(tape, tape.constant(random_tensor(rng, Shape{64, 64, 3})));
    EXPECT_EQ(tape.trainable_scalar_count(), m.parameter_count()) << to_string(v);
  }
}

}  // namespace
}  // namespace umix
