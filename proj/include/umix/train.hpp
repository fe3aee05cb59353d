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

// Training loop (Adam, cross-entropy at H/4) and mIoU evaluation.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/config.hpp"
#include "umix/data.hpp"
#include "umix/metrics.hpp"
#include "umix/model.hpp"
#include "umix/nn.hpp"

namespace umix {

/// Spatial reduction between the input image and the logits.
inline constexpr std::size_t kOutputStride = 4;

struct TrainOptions {
  /// Total epochs; a resumed state continues from its epoch counter.
  std::size_t epochs = 40;
  double lr = 2e-3;
  std::size_t batch_size = 8;
  /// lr * (1 - step / total_steps)^power when enabled.
  bool poly_decay = false;
  double poly_power = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_miou = 0.0;
  std::optional<double> val_miou;
};

struct TrainState {
  Model model;
  std::vector<Tensor> adam_m;
  std::vector<Tensor> adam_v;
  std::uint64_t step = 0;
  std::size_t epochs_done = 0;
  std::mt19937_64 rng;  // sample-order stream
};

inline TrainState init_train_state(const ModelConfig& config,
                                   std::uint64_t seed) {
  TrainState s{Model(config, seed), {}, {}, 0, 0,
               std::mt19937_64(seed ^ 0x9E3779B97F4A7C15ULL)};
  for (const Parameter* p : s.model.parameters()) {
    s.adam_m.emplace_back(p->value.shape());
    s.adam_v.emplace_back(p->value.shape());
  }
  return s;
}

/// FNV-1a over every parameter's bytes.
inline std::uint64_t parameter_hash(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Parameter* p : model.parameters())
    for (double v : p->value.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  return h;
}

/// Argmax class per logit pixel (ties resolve to the lower class id).
inline std::vector<int> predict_classes(const Tensor& logits) {
  const std::size_t k = logits.shape().back();
  const std::size_t n = logits.size() / k;
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

inline std::vector<int> target_labels(const Sample& s) {
  return downsample_labels(s.labels, s.image.dim(0), s.image.dim(1),
                           kOutputStride);
}

inline Tensor infer_logits(const Model& model, const Tensor& image) {
  Tape tape(false);
  return model.forward(tape, tape.constant(image, "image")).logits.value();
}

struct EvalResult {
  double miou = 0.0;
  std::vector<std::optional<double>> per_class;
  ConfusionMatrix confusion{1};
};

inline EvalResult evaluate(const Model& model, std::span<const Sample> samples) {
  if (samples.empty()) throw UsageError("evaluate: empty dataset");
  ConfusionMatrix cm(model.config().num_classes);
  for (const Sample& s : samples)
    cm.update(predict_classes(infer_logits(model, s.image)), target_labels(s));
  EvalResult r{cm.mean_iou(), {}, cm};
  for (std::size_t c = 0; c < cm.num_classes(); ++c)
    r.per_class.push_back(cm.iou(c));
  return r;
}

namespace detail {

[[noreturn]] inline void report_non_finite(const Tape& tape) {
  std::string where = "unknown location";
  if (auto id = tape.first_non_finite()) {
    const std::string& label = tape.label(*id);
    where = (label.empty() ? std::string("<unlabelled>") : label) + " (" +
            std::string(op_name(tape.kind(*id))) + ", node " +
            std::to_string(*id) + ")";
  }
  throw NumericalError("non-finite loss; first non-finite value produced by " +
                       where);
}

inline void adam_update(TrainState& s, const std::vector<Parameter*>& params,
                        const std::vector<Tensor>& grads, double lr,
                        const TrainOptions& o) {
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k]->value;
    Tensor& m = s.adam_m[k];
    Tensor& v = s.adam_v[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double mh = m[i] / c1, vh = v[i] / c2;
      p[i] -= lr * mh / (std::sqrt(vh) + o.adam_eps);
    }
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs epochs state.epochs_done + 1 .. options.epochs over `train` (shuffled
/// every epoch), evaluating on `val` after each epoch when it is non-empty.
inline std::vector<EpochMetrics> train(TrainState& state,
                                       std::span<const Sample> train_set,
                                       std::span<const Sample> val_set,
                                       const TrainOptions& o,
                                       const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw UsageError("train: empty training set");
  if (o.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (o.lr < 0.0) throw ConfigError("train: negative learning rate");
  Model& model = state.model;
  const std::vector<Parameter*> params = model.parameters();
  const std::size_t batches =
      (train_set.size() + o.batch_size - 1) / o.batch_size;
  const double total_steps = static_cast<double>(batches * o.epochs);

  std::vector<std::vector<int>> targets;
  targets.reserve(train_set.size());
  for (const Sample& s : train_set) targets.push_back(target_labels(s));

  std::vector<EpochMetrics> log;
  std::vector<std::size_t> order(train_set.size());
  while (state.epochs_done < o.epochs) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.rng);
    ConfusionMatrix cm(model.config().num_classes);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * o.batch_size;
      const std::size_t end = std::min(begin + o.batch_size, order.size());
      Tape tape;
      std::vector<Variable> losses;
      for (std::size_t k = begin; k < end; ++k) {
        const Sample& s = train_set[order[k]];
        Variable image = tape.constant(s.image, "image");
        Variable logits = model.forward(tape, image).logits;
        const std::size_t kc = logits.shape()[2];
        const std::size_t n = logits.value().size() / kc;
        cm.update(predict_classes(logits.value()), targets[order[k]]);
        losses.push_back(ad::cross_entropy(ad::reshape(logits, Shape{n, kc}),
                                           targets[order[k]]));
      }
      Variable total = losses[0];
      for (std::size_t k = 1; k < losses.size(); ++k)
        total = ad::add(total, losses[k]);
      Variable loss =
          ad::scale(total, 1.0 / static_cast<double>(losses.size()));
      if (!std::isfinite(loss.value()[0])) detail::report_non_finite(tape);
      tape.backward(loss);
      loss_sum += loss.value()[0] * static_cast<double>(losses.size());

      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (const Parameter* p : params) {
        auto v = tape.bound(*p);
        grads.push_back(v ? v->grad() : Tensor::zeros(p->value.shape()));
      }
      double lr = o.lr;
      if (o.poly_decay && total_steps > 0.0)
        lr *= std::pow(
            std::max(0.0, 1.0 - static_cast<double>(state.step) / total_steps),
            o.poly_power);
      detail::adam_update(state, params, grads, lr, o);
    }
    ++state.epochs_done;
    EpochMetrics m;
    m.epoch = state.epochs_done;
    m.loss = loss_sum / static_cast<double>(train_set.size());
    m.train_miou = cm.mean_iou();
    if (!val_set.empty()) m.val_miou = evaluate(model, val_set).miou;
    log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return log;
}

/// `key=value` record for an epoch, with round-trip precision.
inline std::string format_epoch(const EpochMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(17) << "epoch=" << m.epoch << " loss=" << m.loss
     << " train_miou=" << m.train_miou;
  if (m.val_miou) os << " val_miou=" << *m.val_miou;
  return os.str();
}

}  // namespace umix
