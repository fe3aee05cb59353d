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
#include <limits>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "umix/train.hpp"

namespace umix {
namespace {

std::vector<Sample> samples(std::size_t n, std::uint64_t seed = 0) {
  DatasetOptions o;
  o.seed = seed;
  o.count = n;
  return generate_dataset(o).samples;
}

TEST(TrainTest, ZeroLearningRateLeavesParametersUntouched) {
  const auto data = samples(4);
  TrainState st = init_train_state(ModelConfig{}, 0);
  const std::uint64_t before = parameter_hash(st.model);
  TrainOptions o;
  o.epochs = 1;
  o.lr = 0.0;
  o.batch_size = 2;
  train(st, data, {}, o);
  EXPECT_EQ(parameter_hash(st.model), before);
  EXPECT_EQ(st.step, 2u);
}

TEST(TrainTest, OverfitsSingleSample) {
  const auto data = samples(1, 3);
  TrainState st = init_train_state(ModelConfig{}, 1);
  TrainOptions o;
  o.epochs = 200;
  o.batch_size = 1;
  std::vector<EpochMetrics> log = train(st, data, {}, o);
  EXPECT_LT(log.back().loss, log.front().loss);
  EXPECT_GE(evaluate(st.model, data).miou, 0.95);
}

TEST(TrainTest, SeedsGiveDifferentModelsAndRunsRepeat) {
  const auto data = samples(4);
  TrainOptions o;
  o.epochs = 1;
  o.batch_size = 2;
  TrainState a = init_train_state(ModelConfig{}, 0);
  TrainState b = init_train_state(ModelConfig{}, 0);
  TrainState c = init_train_state(ModelConfig{}, 1);
  const auto la = train(a, data, data, o), lb = train(b, data, data, o);
  train(c, data, {}, o);
  EXPECT_EQ(parameter_hash(a.model), parameter_hash(b.model));
  EXPECT_NE(parameter_hash(a.model), parameter_hash(c.model));
  EXPECT_EQ(format_epoch(la[0]), format_epoch(lb[0]));
  ASSERT_TRUE(la[0].val_miou.has_value());
}

TEST(TrainTest, ResumingContinuesTheSameTrajectory) {
  const auto data = samples(4);
  TrainOptions o;
  o.epochs = 2;
  o.batch_size = 2;
  TrainState whole = init_train_state(ModelConfig{}, 5);
  train(whole, data, {}, o);
  TrainState split = init_train_state(ModelConfig{}, 5);
  TrainOptions first = o;
  first.epochs = 1;
  train(split, data, {}, first);
  EXPECT_EQ(split.epochs_done, 1u);
  train(split, data, {}, o);
  EXPECT_EQ(split.epochs_done, 2u);
  EXPECT_EQ(parameter_hash(split.model), parameter_hash(whole.model));
}

TEST(TrainTest, PolyDecayChangesTrajectory) {
  const auto data = samples(4);
  TrainOptions o;
  o.epochs = 2;
  o.batch_size = 2;
  TrainState a = init_train_state(ModelConfig{}, 0);
  TrainState b = init_train_state(ModelConfig{}, 0);
  train(a, data, {}, o);
  o.poly_decay = true;
  train(b, data, {}, o);
  EXPECT_NE(parameter_hash(a.model), parameter_hash(b.model));
}

TEST(TrainTest, NonFiniteLossNamesTheProducer) {
  const auto data = samples(2);
  TrainState st = init_train_state(ModelConfig{}, 0);
  st.model.parameters().front()->value[0] =
      std::numeric_limits<double>::quiet_NaN();
  TrainOptions o;
  o.epochs = 1;
  try {
    train(st, data, {}, o);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(TrainTest, InvalidInputs) {
  TrainState st = init_train_state(ModelConfig{}, 0);
  TrainOptions o;
  EXPECT_THROW(train(st, {}, {}, o), UsageError);
  EXPECT_THROW(evaluate(st.model, {}), UsageError);
  const auto data = samples(1);
  o.batch_size = 0;
  EXPECT_THROW(train(st, data, {}, o), ConfigError);
}

TEST(TrainTest, PredictionTiesGoToLowerClass) {
  Tensor logits(Shape{1, 2, 3}, std::vector<double>{1, 1, 0, 0, 2, 2});
  EXPECT_EQ(predict_classes(logits), (std::vector<int>{0, 1}));
}

}  // namespace
}  // namespace umix
