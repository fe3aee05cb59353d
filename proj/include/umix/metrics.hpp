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
#include <optional>
#include <span>
#include <vector>

#include "umix/errors.hpp"

namespace umix {

/// Confusion counts: rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : k_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return k_; }

  void update(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size())
      throw DimensionError("ConfusionMatrix: prediction and label sizes differ");
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const int t = truth[i], p = predicted[i];
      if (t < 0) continue;  // ignored label
      if (static_cast<std::size_t>(t) >= k_ || p < 0 ||
          static_cast<std::size_t>(p) >= k_)
        throw UsageError("ConfusionMatrix: class id out of range");
      ++counts_[static_cast<std::size_t>(t) * k_ + static_cast<std::size_t>(p)];
    }
  }

  std::uint64_t count(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * k_ + predicted];
  }

  /// TP / (TP + FP + FN); nullopt when the class occurs in neither.
  std::optional<double> iou(std::size_t c) const {
    std::uint64_t tp = count(c, c), fp = 0, fn = 0;
    for (std::size_t o = 0; o < k_; ++o) {
      if (o == c) continue;
      fp += count(o, c);
      fn += count(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(denom);
  }

  /// Mean IoU over classes present in the prediction or the ground truth.
  double mean_iou() const {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < k_; ++c)
      if (auto v = iou(c)) {
        total += *v;
        ++n;
      }
    return n ? total / static_cast<double>(n) : 0.0;
  }

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

}  // namespace umix
