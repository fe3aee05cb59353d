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

// Builds the default toy model, runs one image through it and prints the
// shape of every encoder and decoder feature.

#include <iostream>

#include "umix/umix.hpp"

int main() {
  umix::ModelConfig config;
  umix::Model model(config, /*seed=*/0);

  umix::DatasetOptions data;
  data.count = 1;
  const umix::Sample sample = umix::generate_dataset(data).samples.front();

  umix::Tape tape(/*record_gradients=*/false);
  const auto out = model.forward(tape, tape.constant(sample.image, "image"));

  for (const auto& e : out.encoder.features)
    std::cout << "E" << e.stage << " " << e.tensor.shape().to_string() << "\n";
  for (const auto& d : out.decoder.features)
    std::cout << "D" << d.stage << " " << d.tensor.shape().to_string() << "\n";
  std::cout << "logits " << out.logits.shape().to_string() << "\n";
  std::cout << "params " << model.parameter_count() << "\n";
  return 0;
}
