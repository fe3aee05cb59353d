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

// Gradient-check suites: every differentiable op in isolation, one decoder
// stage, and a full model.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/config.hpp"
#include "umix/model.hpp"
#include "umix/nn.hpp"

namespace umix {

inline constexpr double kGradCheckEpsilon = 1e-5;

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

struct GradCheckGroup {
  std::string name;
  double tolerance = 0.0;
  std::vector<GradCheckCase> cases;

  bool passed() const {
    for (const auto& c : cases)
      if (!c.report.passed()) return false;
    return true;
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& c : cases) m = std::max(m, c.report.max_rel_error());
    return m;
  }
};

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.data()) v = d(rng);
  return t;
}

/// sum(x * w) for a fixed random w of x's shape; a scalar loss whose
/// gradient with respect to x is w.
inline Variable weighted_sum(Tape& tape, const Variable& x, std::uint64_t seed) {
  Rng rng(seed);
  Variable w = tape.constant(random_tensor(rng, x.shape()), "loss_weights");
  return ad::sum(ad::mul(x, w));
}

/// Key-projection biases shift every score of a query row by the same amount,
/// which softmax cancels, so their gradient is identically zero.
inline std::vector<std::string> key_bias_names(
    const std::vector<Parameter*>& ps) {
  std::vector<std::string> out;
  for (const Parameter* p : ps)
    if (p->name.size() >= 7 &&
        p->name.compare(p->name.size() - 7, 7, ".k.bias") == 0)
      out.push_back(p->name);
  return out;
}

namespace detail {

inline std::vector<NamedTensor> random_leaves(
    Rng& rng, std::initializer_list<std::pair<const char*, Shape>> specs) {
  std::vector<NamedTensor> out;
  for (const auto& [name, shape] : specs)
    out.push_back({name, random_tensor(rng, shape)});
  return out;
}

}  // namespace detail

/// Every differentiable op on small random inputs.
inline GradCheckGroup check_ops(std::uint64_t seed, double tol,
                                double eps = kGradCheckEpsilon) {
  GradCheckGroup g{"ops", tol, {}};
  Rng rng(seed);
  auto run = [&](const std::string& name, std::vector<NamedTensor> leaves,
                 const std::function<Variable(Tape&, std::span<const Variable>)>& op,
                 const std::vector<std::string>& zero = {}) {
    const std::uint64_t wseed = rng();
    GraphBuilder f = [&, wseed](Tape& t, std::span<const Variable> v) {
      return weighted_sum(t, op(t, v), wseed);
    };
    g.cases.push_back({name, grad_check(f, std::move(leaves), eps, tol, zero)});
  };
  using V = std::span<const Variable>;

  run("add", detail::random_leaves(rng, {{"a", Shape{3, 4}}, {"b", Shape{3, 4}}}),
      [](Tape&, V v) { return ad::add(v[0], v[1]); });
  run("sub", detail::random_leaves(rng, {{"a", Shape{3, 4}}, {"b", Shape{3, 4}}}),
      [](Tape&, V v) { return ad::sub(v[0], v[1]); });
  run("mul", detail::random_leaves(rng, {{"a", Shape{3, 4}}, {"b", Shape{3, 4}}}),
      [](Tape&, V v) { return ad::mul(v[0], v[1]); });
  run("scale", detail::random_leaves(rng, {{"a", Shape{2, 5}}}),
      [](Tape&, V v) { return ad::scale(v[0], -1.7); });
  run("add_row", detail::random_leaves(rng, {{"x", Shape{4, 3}}, {"b", Shape{3}}}),
      [](Tape&, V v) { return ad::add_row(v[0], v[1]); });
  run("matmul", detail::random_leaves(rng, {{"a", Shape{3, 4}}, {"b", Shape{4, 5}}}),
      [](Tape&, V v) { return ad::matmul(v[0], v[1]); });
  run("transpose", detail::random_leaves(rng, {{"a", Shape{3, 5}}}),
      [](Tape&, V v) { return ad::transpose(v[0]); });
  run("reshape", detail::random_leaves(rng, {{"a", Shape{2, 3, 4}}}),
      [](Tape&, V v) { return ad::reshape(v[0], Shape{6, 4}); });
  run("sum", detail::random_leaves(rng, {{"a", Shape{3, 4}}}),
      [](Tape&, V v) { return ad::sum(v[0]); });
  run("softmax_rows", detail::random_leaves(rng, {{"a", Shape{4, 6}}}),
      [](Tape&, V v) { return ad::softmax_rows(v[0]); });
  run("avg_pool", detail::random_leaves(rng, {{"x", Shape{4, 8, 3}}}),
      [](Tape&, V v) { return ad::avg_pool(v[0], 2, 2); });
  run("bilinear_upsample", detail::random_leaves(rng, {{"x", Shape{3, 2, 2}}}),
      [](Tape&, V v) { return ad::bilinear_upsample(v[0], 7, 5); });
  run("concat_channels",
      detail::random_leaves(rng, {{"a", Shape{2, 2, 3}}, {"b", Shape{2, 2, 2}}}),
      [](Tape&, V v) { return ad::concat_channels(v); });
  run("slice_channels", detail::random_leaves(rng, {{"x", Shape{3, 6}}}),
      [](Tape&, V v) { return ad::slice_channels(v[0], 2, 3); });
  run("pixel_unshuffle", detail::random_leaves(rng, {{"x", Shape{4, 4, 2}}}),
      [](Tape&, V v) { return ad::pixel_unshuffle(v[0], 2); });
  run("gelu", detail::random_leaves(rng, {{"x", Shape{3, 5}}}),
      [](Tape&, V v) { return ad::gelu(ad::scale(v[0], 3.0)); });
  run("layer_norm",
      detail::random_leaves(
          rng, {{"x", Shape{4, 6}}, {"gamma", Shape{6}}, {"beta", Shape{6}}}),
      [](Tape&, V v) {
        return ad::layer_norm(v[0], v[1], v[2], kLayerNormEpsilon);
      });
  {
    std::vector<int> labels = {0, 2, kIgnoreLabel, 1, 3};
    run("cross_entropy", detail::random_leaves(rng, {{"logits", Shape{5, 4}}}),
        [labels](Tape&, V v) {
          return ad::cross_entropy(ad::scale(v[0], 2.0), labels);
        });
  }
  {
    MultiHeadAttention mha("attn", 4, 6, 2, 2, rng);
    std::vector<NamedTensor> leaves = detail::random_leaves(
        rng, {{"xq", Shape{3, 4}}, {"xkv", Shape{5, 6}}});
    std::vector<Parameter*> ps;
    mha.collect(ps);
    for (const Parameter* p : ps) leaves.push_back({p->name, p->value});
    run("attention", std::move(leaves), [&mha, ps](Tape& t, V v) {
      for (std::size_t k = 0; k < ps.size(); ++k) t.alias(*ps[k], v[2 + k]);
      return attention_forward(t, v[0], v[1], mha);
    }, key_bias_names(ps));
  }
  {
    LinearLayer layer("reduce", 3, 3, rng);
    std::vector<NamedTensor> leaves = detail::random_leaves(
        rng, {{"f", Shape{4, 4, 3}}});
    leaves.push_back({layer.weight.name, layer.weight.value});
    leaves.push_back({layer.bias.name, layer.bias.value});
    run("spatial_reduce", std::move(leaves), [&layer](Tape& t, V v) {
      t.alias(layer.weight, v[1]);
      t.alias(layer.bias, v[2]);
      return spatial_reduce(t, v[0], 2, layer);
    });
  }
  return g;
}

/// Decoder stage i with its parameters and every feature it may read as
/// leaves. Features are uniform random; parameters keep their initialization.
inline GradCheckGroup check_decoder_stage(const ModelConfig& config,
                                          std::size_t stage,
                                          std::uint64_t seed, double tol,
                                          double eps = kGradCheckEpsilon) {
  Model model(config, seed);
  Rng rng(seed + 1);
  const std::size_t n = config.num_stages;
  std::vector<NamedTensor> leaves;
  for (std::size_t j = 1; j <= n; ++j)
    leaves.push_back({"E" + std::to_string(j),
                      random_tensor(rng, Shape{config.stage_h(j),
                                               config.stage_w(j),
                                               config.stage_channels(j)})});
  for (std::size_t j = 1; j <= n; ++j)
    leaves.push_back({"D" + std::to_string(j), leaves[j - 1].value});
  for (std::size_t j = 1; j <= n; ++j)
    leaves[n + j - 1].value = random_tensor(rng, leaves[j - 1].value.shape());
  const bool has_mid = config.plus_midpoint;
  if (has_mid) leaves.push_back({"E3_mid", random_tensor(rng, leaves[2].value.shape())});
  const std::size_t first_param = leaves.size();
  std::vector<Parameter*> ps;
  const_cast<DecoderStage&>(model.decoder().stage(stage)).collect(ps);
  for (const Parameter* p : ps) leaves.push_back({p->name, p->value});

  const std::uint64_t wseed = rng();
  GraphBuilder f = [&](Tape& t, std::span<const Variable> v) {
    for (std::size_t k = 0; k < ps.size(); ++k) t.alias(*ps[k], v[first_param + k]);
    EncoderOutput enc;
    for (std::size_t j = 1; j <= n; ++j)
      enc.features.push_back(FeatureMap{v[j - 1], j, FeatureOrigin::kEncoder});
    if (has_mid)
      enc.midpoint = FeatureMap{v[2 * n], 3, FeatureOrigin::kEncoderMidpoint};
    std::vector<std::optional<FeatureMap>> decoded(n);
    for (std::size_t j = 1; j <= n; ++j)
      decoded[j - 1] = FeatureMap{v[n + j - 1], j, FeatureOrigin::kDecoder};
    FeatureMap d = model.decoder().run_stage(t, stage, enc, decoded);
    return weighted_sum(t, d.tensor, wseed);
  };
  GradCheckGroup g{"decoder_stage", tol, {}};
  g.cases.push_back({"decoder.stage" + std::to_string(stage),
                     grad_check(f, leaves, eps, tol, key_bias_names(ps))});
  return g;
}

/// Every model parameter as a leaf; the input image is a fixed random constant.
inline GradCheckGroup check_full_model(const ModelConfig& config,
                                       std::uint64_t seed, double tol,
                                       double eps = kGradCheckEpsilon) {
  Model model(config, seed);
  Rng rng(seed + 2);
  const Tensor image =
      random_tensor(rng, Shape{config.img_h, config.img_w, 3});
  std::vector<NamedTensor> leaves;
  std::vector<Parameter*> ps = model.parameters();
  for (const Parameter* p : ps) leaves.push_back({p->name, p->value});
  const std::uint64_t wseed = rng();
  GraphBuilder f = [&](Tape& t, std::span<const Variable> v) {
    for (std::size_t k = 0; k < ps.size(); ++k) t.alias(*ps[k], v[k]);
    Variable x = t.constant(image, "image");
    return weighted_sum(t, model.forward(t, x).logits, wseed);
  };
  GradCheckGroup g{"full_model", tol, {}};
  g.cases.push_back(
      {"model", grad_check(f, leaves, eps, tol, key_bias_names(ps))});
  return g;
}

/// Copies the key/value wiring switches of `base` onto a shape template.
inline void copy_variant(const ModelConfig& base, ModelConfig& c) {
  c.attention_variant = base.attention_variant;
  c.propagate = base.propagate;
  c.plus_midpoint = base.plus_midpoint;
}

/// Smallest configuration whose last decoder stage mixes encoder and decoder
/// features over more than one key (three stages when the midpoint is used).
inline ModelConfig minimal_stage_config(const ModelConfig& base = {}) {
  ModelConfig c;
  if (base.plus_midpoint) {
    c.num_stages = 3;
    c.img_h = c.img_w = 32;
    c.channels = {4, 4, 8};
    c.depths = {1, 1, 2};
  } else {
    c.num_stages = 2;
    c.img_h = c.img_w = 16;
    c.channels = {4, 8};
    c.depths = {1, 1};
  }
  c.num_classes = 3;
  c.head_embed_dim = 8;
  copy_variant(base, c);
  return c;
}

/// Four-stage model with channels (4, 4, 8, 8) and 3 classes. 64x64 is the
/// smallest input for which the last stage attends over more than one key.
inline ModelConfig tiny_gradcheck_config(const ModelConfig& base = {}) {
  ModelConfig c;
  c.num_stages = 4;
  c.img_h = 64;
  c.img_w = 64;
  c.channels = {4, 4, 8, 8};
  c.depths = {1, 1, 1, 1};
  c.num_classes = 3;
  c.head_embed_dim = 8;
  copy_variant(base, c);
  return c;
}

struct GradCheckSuite {
  GradCheckGroup ops;
  GradCheckGroup stage;
  GradCheckGroup model;
  bool passed() const { return ops.passed() && stage.passed() && model.passed(); }
};

/// The three groups: ops in isolation, the last stage of
/// minimal_stage_config(base), and the full tiny_gradcheck_config(base).
inline GradCheckSuite run_gradcheck_suite(const ModelConfig& base,
                                          std::uint64_t seed, double ops_tol,
                                          double stage_tol, double model_tol) {
  GradCheckSuite s;
  s.ops = check_ops(seed, ops_tol);
  const ModelConfig sc = minimal_stage_config(base);
  s.stage = check_decoder_stage(sc, sc.num_stages, seed, stage_tol);
  s.model = check_full_model(tiny_gradcheck_config(base), seed, model_tol);
  return s;
}

}  // namespace umix
