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

// Four-arm comparison of key/value wiring: cross- vs mix-attention, with and
// without propagation of decoder outputs.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "umix/analysis.hpp"
#include "umix/config.hpp"
#include "umix/data.hpp"
#include "umix/train.hpp"

namespace umix {

struct AblationArm {
  std::string name;
  ModelConfig config;
};

/// Arms in table order; each copies `base` and overrides the wiring switches.
inline std::vector<AblationArm> ablation_arms(const ModelConfig& base) {
  auto make = [&](const char* name, AttentionVariant v, bool propagate) {
    ModelConfig c = base;
    c.attention_variant = v;
    c.propagate = propagate;
    c.plus_midpoint = false;
    return AblationArm{name, c};
  };
  return {
      make("Baseline - FeedFormer (Cross-Attention)",
           AttentionVariant::kCrossLowest, false),
      make("Mix-Attention", AttentionVariant::kMix, false),
      make("Cross-Attention + U-Net", AttentionVariant::kCrossLowest, true),
      make("Mix-Attention + U-Net (proposed method)", AttentionVariant::kMix,
           true),
  };
}

struct AblationRow {
  std::string arm;
  std::vector<double> miou;  // one per seed
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  std::uint64_t kv_path_flops = 0;

  double mean() const {
    double s = 0.0;
    for (double v : miou) s += v;
    return miou.empty() ? 0.0 : s / static_cast<double>(miou.size());
  }
  /// Sample standard deviation over seeds.
  double stddev() const {
    if (miou.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : miou) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(miou.size() - 1));
  }
};

/// Trains every arm once per seed under identical options and data, and
/// reports validation mIoU with the analytic cost at (flops_h, flops_w).
inline std::vector<AblationRow> run_ablation(
    const ModelConfig& base, std::span<const Sample> train_set,
    std::span<const Sample> val_set, std::span<const std::uint64_t> seeds,
    TrainOptions options, std::size_t flops_h, std::size_t flops_w,
    const std::function<void(const std::string&, std::uint64_t, double)>&
        on_run = {}) {
  if (seeds.empty()) throw ConfigError("ablation: no seeds given");
  if (val_set.empty()) throw UsageError("ablation: empty validation set");
  std::vector<AblationRow> rows;
  for (const AblationArm& arm : ablation_arms(base)) {
    AblationRow row;
    row.arm = arm.name;
    const CostReport cost = count_flops(arm.config, flops_h, flops_w);
    row.params = cost.total_params();
    row.flops = cost.total_flops();
    row.kv_path_flops = cost.kv_path_flops();
    for (std::uint64_t seed : seeds) {
      TrainState st = init_train_state(arm.config, seed);
      train(st, train_set, {}, options);
      const double miou = evaluate(st.model, val_set).miou;
      row.miou.push_back(miou);
      if (on_run) on_run(arm.name, seed, miou);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// One `key=value` record per arm.
inline void write_ablation(std::ostream& os,
                           const std::vector<AblationRow>& rows) {
  os << std::setprecision(17);
  for (const AblationRow& r : rows) {
    os << "arm=\"" << r.arm << "\" miou_mean=" << r.mean()
       << " miou_std=" << r.stddev() << " miou=";
    for (std::size_t k = 0; k < r.miou.size(); ++k)
      os << (k ? "," : "") << r.miou[k];
    os << " params=" << r.params << " flops=" << r.flops
       << " kv_path_flops=" << r.kv_path_flops << '\n';
  }
}

}  // namespace umix
