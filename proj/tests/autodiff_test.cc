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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "umix/autodiff.hpp"
#include "umix/gradcheck.hpp"

namespace umix {
namespace {

TEST(TapeTest, ProductRuleAndFanOut) {
  Tape tape;
  Variable x = tape.leaf(Tensor(Shape{2}, std::vector<double>{3, -2}), "x");
  // f = sum(x * x + x) -> df/dx = 2x + 1
  Variable f = ad::sum(ad::add(ad::mul(x, x), x));
  tape.backward(f);
  EXPECT_EQ(x.grad().values(), (std::vector<double>{7, -3}));
}

TEST(TapeTest, MatmulGradients) {
  Tape tape;
  Variable a = tape.leaf(Tensor(Shape{1, 2}, std::vector<double>{1, 2}));
  Variable b = tape.leaf(Tensor(Shape{2, 1}, std::vector<double>{3, 4}));
  tape.backward(ad::sum(ad::matmul(a, b)));
  EXPECT_EQ(a.grad().values(), (std::vector<double>{3, 4}));
  EXPECT_EQ(b.grad().values(), (std::vector<double>{1, 2}));
}

TEST(TapeTest, ConstantsReceiveNoGradient) {
  Tape tape;
  Variable x = tape.leaf(Tensor::full(Shape{3}, 2.0));
  Variable c = tape.constant(Tensor::full(Shape{3}, 5.0));
  tape.backward(ad::sum(ad::mul(x, c)));
  EXPECT_FALSE(tape.requires_grad(c.id()));
  EXPECT_EQ(c.grad().values(), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(x.grad().values(), (std::vector<double>{5, 5, 5}));
}

TEST(TapeTest, BackwardPreconditions) {
  Tape tape;
  Variable x = tape.leaf(Tensor::full(Shape{2}, 1.0));
  EXPECT_THROW(tape.backward(x), UsageError);  // not a scalar
  Variable s = ad::sum(x);
  tape.backward(s);
  EXPECT_THROW(tape.backward(s), UsageError);
  tape.reset_gradients();
  EXPECT_NO_THROW(tape.backward(s));

  Tape inference(false);
  Variable y = inference.leaf(Tensor::full(Shape{2}, 1.0));
  EXPECT_THROW(inference.backward(ad::sum(y)), UsageError);
}

TEST(TapeTest, MixingTapesIsRejected) {
  Tape t1, t2;
  Variable a = t1.leaf(Tensor::full(Shape{2}, 1.0));
  Variable b = t2.leaf(Tensor::full(Shape{2}, 1.0));
  EXPECT_THROW(ad::add(a, b), UsageError);
}

TEST(TapeTest, BindIsIdempotentAndAliasRoutes) {
  Parameter p{"w", Tensor::full(Shape{2}, 1.0)};
  Tape tape;
  Variable v1 = tape.bind(p);
  EXPECT_EQ(tape.bind(p).id(), v1.id());
  Variable other = tape.leaf(Tensor::full(Shape{2}, 4.0));
  tape.alias(p, other);
  EXPECT_EQ(tape.bind(p).id(), other.id());
  EXPECT_THROW(tape.alias(p, tape.leaf(Tensor(Shape{3}))), DimensionError);
}

TEST(TapeTest, ScopesLabelNodes) {
  Tape tape;
  Variable x = tape.leaf(Tensor::full(Shape{2}, 1.0), "x");
  {
    auto outer = tape.scope("outer");
    auto inner = tape.scope("inner");
    Variable y = tape.leaf(Tensor::full(Shape{2}, 1.0), "y");
    EXPECT_EQ(tape.label(y.id()), "outer.inner.y");
  }
  EXPECT_EQ(tape.label(x.id()), "x");
}

TEST(TapeTest, FirstNonFiniteFindsProducer) {
  Tape tape;
  Variable x = tape.leaf(Tensor::full(Shape{2}, 1.0), "x");
  Variable bad = tape.constant(
      Tensor::full(Shape{2}, std::numeric_limits<double>::infinity()), "bad");
  (void)x;
  ASSERT_TRUE(tape.first_non_finite().has_value());
  EXPECT_EQ(*tape.first_non_finite(), bad.id());
}

TEST(GradCheckTest, EpsilonRangeEnforced) {
  GraphBuilder f = [](Tape&, std::span<const Variable> v) { return ad::sum(v[0]); };
  std::vector<NamedTensor> leaves{{"x", Tensor::full(Shape{2}, 1.0)}};
  EXPECT_THROW(grad_check(f, leaves, 1e-8, 1e-6), UsageError);
  EXPECT_THROW(grad_check(f, leaves, 1e-3, 1e-6), UsageError);
  EXPECT_TRUE(grad_check(f, leaves, 1e-5, 1e-6).passed());
}

// A deliberately wrong backward rule must be caught.
TEST(GradCheckTest, CorruptedBackwardIsDetected) {
  GraphBuilder f = [](Tape& t, std::span<const Variable> v) {
    const Variable& x = v[0];
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = x.value()[i] * x.value()[i];
    const Variable inputs[] = {x};
    Variable sq = t.record(OpKind::kCustom, inputs, out, [](BackwardContext& c) {
      Tensor g(c.input(0).shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = 2.1 * c.input(0)[i] * c.grad_output()[i];  // should be 2.0
      c.accumulate(0, g);
    });
    return ad::sum(sq);
  };
  std::vector<NamedTensor> leaves{
      {"x", Tensor(Shape{3}, std::vector<double>{0.5, -1.0, 2.0})}};
  const GradCheckReport r = grad_check(f, leaves, 1e-5, 1e-6);
  EXPECT_FALSE(r.passed());
  EXPECT_NEAR(r.max_rel_error(), 0.1 / 2.1, 1e-6);
}

TEST(GradCheckTest, StructuralZeroLeafJudgedOnAbsoluteSize) {
  Rng rng(3);
  MultiHeadAttention mha("attn", 3, 4, 1, 3, rng);
  std::vector<Parameter*> ps;
  mha.collect(ps);
  std::vector<NamedTensor> leaves{{"xq", random_tensor(rng, Shape{2, 3})},
                                  {"xkv", random_tensor(rng, Shape{5, 4})}};
  for (const Parameter* p : ps) leaves.push_back({p->name, p->value});
  GraphBuilder f = [&](Tape& t, std::span<const Variable> v) {
    for (std::size_t k = 0; k < ps.size(); ++k) t.alias(*ps[k], v[2 + k]);
    return weighted_sum(t, attention_forward(t, v[0], v[1], mha), 9);
  };
  const auto zero = key_bias_names(ps);
  ASSERT_EQ(zero, (std::vector<std::string>{"attn.k.bias"}));
  const GradCheckReport r = grad_check(f, leaves, 1e-5, 1e-6, zero);
  EXPECT_TRUE(r.passed());
  for (const auto& l : r.leaves) {
    if (l.name != "attn.k.bias") continue;
    EXPECT_TRUE(l.structural_zero);
    EXPECT_LE(l.max_abs_analytic, kStructuralZeroAnalytic);
  }
}

TEST(GradCheckTest, OpsGroupPasses) {
  const GradCheckGroup g = check_ops(0, 1e-6);
  EXPECT_TRUE(g.passed()) << "max rel error " << g.max_rel_error();
  EXPECT_GE(g.cases.size(), 19u);
}

}  // namespace
}  // namespace umix
