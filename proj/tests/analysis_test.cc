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

#include <sstream>

#include <gtest/gtest.h>

#include "umix/analysis.hpp"
#include "umix/gradcheck.hpp"

namespace umix {
namespace {

// N=2, 16x16, C=(4, 8), one block per stage, 3 classes, head width 8.
ModelConfig two_stage() {
  ModelConfig c;
  c.num_stages = 2;
  c.img_h = c.img_w = 16;
  c.channels = {4, 8};
  c.depths = {1, 1};
  c.num_classes = 3;
  c.head_embed_dim = 8;
  return c;
}

TEST(CountTest, TwoStageParametersByHand) {
  const ModelConfig c = two_stage();
  // encoder: patch 48->4 (196), block (8 + 80 + 68), patch 16->8 (136),
  //          block (16 + 288 + 264)                                 = 1056
  // decoder.stage1 (Cq=8, Ckv=12, dk=8):
  //   reduce 20, norms 16+24+16, q 72, k 104, v 104, o 72, ffn 552  = 980
  // decoder.stage2 (Cq=4, Ckv=12, dk=4):
  //   reduce 20, norms 8+24+8, q 20, k 52, v 52, o 20, ffn 148      = 352
  // head: 12->8 (104), 8->3 (27)                                    = 131
  const CostReport r = count_flops(c, 16, 16);
  EXPECT_EQ(r.module_params("encoder"), 1056u);
  EXPECT_EQ(r.module_params("decoder.stage1"), 980u);
  EXPECT_EQ(r.module_params("decoder.stage2"), 352u);
  EXPECT_EQ(r.module_params("head"), 131u);
  EXPECT_EQ(r.total_params(), 2519u);
  EXPECT_EQ(Model(c, 0).parameter_count(), 2519u);
}

TEST(CountTest, TwoStageDecoderFlopsByHand) {
  // Stage 1 at 16x16: L_q = L_kv = 4, C_q = 8, C_kv = 12, one head of 8.
  //   reduce1: pool 16*4 + 2*4*4*4 + 4*4      = 208
  //   norm_q 8*4*8, norm_kv 8*4*12            = 256 + 384
  //   q, o: 2*4*8*8 + 32                      = 544 each
  //   k, v: 2*4*12*8 + 32                     = 800 each
  //   scores, mixing: 2*4*8*4                 = 256 each
  //   softmax 5*4*4                           = 80
  //   norm_out: residual 32 + 8*4*8           = 288
  //   ffn: 2176 + gelu 1024 + 2080 + res 32   = 5312
  const CostReport r = count_flops(two_stage(), 16, 16);
  EXPECT_EQ(r.module_flops("decoder.stage1"), 9728u);
  // K/V path: reduce, norm_kv, k, v, scores, softmax, mixing.
  std::uint64_t kv = 0;
  for (const auto& e : r.entries)
    if (e.module == "decoder.stage1" && e.kv_path) kv += e.flops;
  EXPECT_EQ(kv, 208u + 384 + 800 + 800 + 256 + 80 + 256);
}

TEST(CountTest, StaticCountMatchesModelWalkAndTape) {
  for (AttentionVariant v : {AttentionVariant::kMix, AttentionVariant::kCrossLowest,
                             AttentionVariant::kSelf}) {
    for (bool plus : {false, true}) {
      if (plus && v != AttentionVariant::kMix) continue;
      ModelConfig c;
      c.attention_variant = v;
      c.plus_midpoint = plus;
      const Model m(c, 0);
      const CostReport walked = count_params(m);
      const CostReport analytic = count_flops(c, 64, 64);
      EXPECT_EQ(walked.total_params(), m.parameter_count());
      EXPECT_EQ(analytic.total_params(), m.parameter_count());
      for (const std::string mod : {"encoder", "decoder.stage1", "decoder.stage4", "head"})
        EXPECT_EQ(walked.module_params(mod), analytic.module_params(mod)) << mod;
    }
  }
}

TEST(CountTest, FlopsGrowWithInputAndParamsDoNot) {
  const ModelConfig c;
  const CostReport a = count_flops(c, 64, 64), b = count_flops(c, 128, 128),
                   d = count_flops(c, 128, 256);
  EXPECT_LT(a.total_flops(), b.total_flops());
  EXPECT_LT(b.total_flops(), d.total_flops());
  EXPECT_EQ(a.total_params(), d.total_params());
  EXPECT_THROW(count_flops(c, 100, 100), ConfigError);
}

TEST(CountTest, MixCheaperThanCrossOnKeyValuePath) {
  ModelConfig mix, cross;
  cross.attention_variant = AttentionVariant::kCrossLowest;
  for (bool propagate : {false, true}) {
    mix.propagate = cross.propagate = propagate;
    const CostReport m = count_flops(mix, 512, 512);
    const CostReport x = count_flops(cross, 512, 512);
    EXPECT_LT(m.kv_path_flops(), x.kv_path_flops());
    EXPECT_LT(m.module_flops("decoder"), x.module_flops("decoder"));
  }
}

TEST(CountTest, MidpointAddsExactlyItsLayers) {
  ModelConfig base, plus;
  plus.plus_midpoint = true;
  const CostReport b = count_flops(base, 64, 64), p = count_flops(plus, 64, 64);
  // Per stage: reduce_mid (C3^2 + C3), wider norm_kv (2 C3), wider k and v
  // projections (2 * C3 * inner), inner = h * dk.
  std::uint64_t extra = 0;
  for (std::size_t i = 1; i <= 4; ++i) {
    const std::uint64_t inner = base.num_heads(i) * base.head_dim(i);
    extra += 32 * 32 + 32 + 2 * 32 + 2 * 32 * inner;
  }
  EXPECT_EQ(p.total_params() - b.total_params(), extra);
}

TEST(ReportTest, KeyValueLines) {
  std::ostringstream os;
  write_report(os, count_flops(two_stage(), 16, 16), true);
  const std::string s = os.str();
  EXPECT_NE(s.find("layer module=decoder.stage1 name=attn.k_proj params=104"),
            std::string::npos);
  EXPECT_NE(s.find("module name=head params=131"), std::string::npos);
  EXPECT_NE(s.find("total params=2519 "), std::string::npos);
}

}  // namespace
}  // namespace umix
