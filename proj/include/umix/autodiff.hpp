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

// Tape-based reverse-mode automatic differentiation.
//
// Every differentiable operation evaluates its forward value eagerly and
// appends a node to the tape. Node ids are assigned in creation order, so
// inputs always precede their consumers and `backward` only needs a single
// reverse sweep. A variable that feeds several consumers receives the sum of
// their gradient contributions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "umix/errors.hpp"
#include "umix/tensor.hpp"

namespace umix {

enum class OpKind {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddRow,
  kMatmul,
  kTranspose,
  kReshape,
  kSoftmaxRows,
  kAvgPool,
  kBilinearUpsample,
  kConcatChannels,
  kSliceChannels,
  kPixelUnshuffle,
  kSum,
  kLayerNorm,
  kGelu,
  kCrossEntropy,
  kCustom,
};

inline std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kAvgPool: return "avg_pool";
    case OpKind::kBilinearUpsample: return "bilinear_upsample";
    case OpKind::kConcatChannels: return "concat_channels";
    case OpKind::kSliceChannels: return "slice_channels";
    case OpKind::kPixelUnshuffle: return "pixel_unshuffle";
    case OpKind::kSum: return "sum";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kGelu: return "gelu";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

/// A named trainable tensor owned by a layer.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

class Variable {
 public:
  Variable() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

  inline const Tensor& value() const;
  inline const Shape& shape() const;
  /// Gradient after backward; zeros if nothing reached this variable.
  inline Tensor grad() const;

 private:
  friend class Tape;
  Variable(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class BackwardContext;
using BackwardFn = std::function<void(BackwardContext&)>;

class Tape {
 public:
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Variable leaf(Tensor value, std::string name = {},
                bool requires_grad = true) {
    return push(OpKind::kLeaf, {}, std::move(value), nullptr,
                requires_grad && recording_, std::move(name));
  }

  Variable constant(Tensor value, std::string name = {}) {
    return push(OpKind::kConstant, {}, std::move(value), nullptr, false,
                std::move(name));
  }

  /// Leaf for a layer parameter; repeated binds return the same variable.
  Variable bind(const Parameter& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return Variable(this, it->second);
    Variable v = leaf(p.value, p.name);
    bound_.emplace(&p, v.id());
    return v;
  }

  /// Routes subsequent binds of `p` to `v` (used to drive a model from
  /// externally owned leaves, e.g. during gradient checks).
  void alias(const Parameter& p, const Variable& v) {
    check_owned(v);
    if (v.shape() != p.value.shape())
      throw DimensionError("alias: parameter " + p.name + " has shape " +
                           p.value.shape().to_string() + ", variable has " +
                           v.shape().to_string());
    bound_[&p] = v.id();
  }

  std::optional<Variable> bound(const Parameter& p) {
    auto it = bound_.find(&p);
    if (it == bound_.end()) return std::nullopt;
    return Variable(this, it->second);
  }

  /// Records a forward value with its backward rule. Inputs must belong to
  /// this tape.
  Variable record(OpKind kind, std::span<const Variable> inputs, Tensor value,
                  BackwardFn backward) {
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    bool needs = false;
    for (const Variable& in : inputs) {
      check_owned(in);
      ids.push_back(in.id());
      needs = needs || nodes_[in.id()].requires_grad;
    }
    detail::debug_check_finite(value, op_name(kind).data());
    if (!recording_ || !needs) backward = nullptr;
    return push(kind, std::move(ids), std::move(value), std::move(backward),
                needs && recording_, {});
  }

  inline void backward(const Variable& loss);

  /// Clears all gradients so backward may run again.
  void reset_gradients() {
    for (Node& n : nodes_) n.grad.reset();
    backward_done_ = false;
  }

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_.at(id).inputs;
  }
  const std::string& label(std::size_t id) const { return nodes_.at(id).label; }
  bool requires_grad(std::size_t id) const {
    return nodes_.at(id).requires_grad;
  }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  Tensor grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.grad ? *n.grad : Tensor::zeros(n.value.shape());
  }

  /// Number of scalars held by trainable leaves.
  std::size_t trainable_scalar_count() const {
    std::size_t total = 0;
    for (const Node& n : nodes_)
      if (n.kind == OpKind::kLeaf && n.requires_grad) total += n.value.size();
    return total;
  }

  /// First node (in evaluation order) whose value contains NaN or Inf.
  std::optional<std::size_t> first_non_finite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].value.all_finite()) return i;
    return std::nullopt;
  }

  class ScopeGuard {
   public:
    ScopeGuard(Tape& tape, std::string name) : tape_(tape) {
      tape_.scopes_.push_back(std::move(name));
    }
    ~ScopeGuard() { tape_.scopes_.pop_back(); }
    ScopeGuard(const ScopeGuard&) = delete;
    ScopeGuard& operator=(const ScopeGuard&) = delete;

   private:
    Tape& tape_;
  };

  /// Labels every node created while the guard is alive with `name`
  /// (nested scopes are joined with '.').
  [[nodiscard]] ScopeGuard scope(std::string name) {
    return ScopeGuard(*this, std::move(name));
  }

 private:
  friend class Variable;
  friend class BackwardContext;

  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::optional<Tensor> grad;
    BackwardFn backward;
    bool requires_grad;
    std::string label;
  };

  void check_owned(const Variable& v) const {
    if (v.tape_ != this)
      throw UsageError("variable belongs to a different tape");
  }

  Variable push(OpKind kind, std::vector<std::size_t> inputs, Tensor value,
                BackwardFn backward, bool requires_grad, std::string name) {
    std::string label;
    for (const std::string& s : scopes_) {
      if (!label.empty()) label += '.';
      label += s;
    }
    if (!name.empty()) label = label.empty() ? name : label + '.' + name;
    nodes_.push_back(Node{kind, std::move(inputs), std::move(value),
                          std::nullopt, std::move(backward), requires_grad,
                          std::move(label)});
    return Variable(this, nodes_.size() - 1);
  }

  void accumulate(std::size_t id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (g.shape() != n.value.shape())
      throw DimensionError("gradient shape " + g.shape().to_string() +
                           " does not match value shape " +
                           n.value.shape().to_string() + " for node " +
                           std::to_string(id));
    if (n.grad)
      add_inplace(*n.grad, g);
    else
      n.grad = g;
  }

  bool recording_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;  // stable references across push_back
  std::unordered_map<const Parameter*, std::size_t> bound_;
  std::vector<std::string> scopes_;
};

class BackwardContext {
 public:
  const Tensor& grad_output() const { return *node().grad; }
  const Tensor& output() const { return node().value; }
  const Tensor& input(std::size_t k) const {
    return tape_.nodes_[node().inputs[k]].value;
  }
  std::size_t input_count() const { return node().inputs.size(); }
  bool needs_grad(std::size_t k) const {
    return tape_.nodes_[node().inputs[k]].requires_grad;
  }
  void accumulate(std::size_t k, const Tensor& g) {
    tape_.accumulate(node().inputs[k], g);
  }

 private:
  friend class Tape;
  BackwardContext(Tape& tape, std::size_t id) : tape_(tape), id_(id) {}
  const Tape::Node& node() const { return tape_.nodes_[id_]; }

  Tape& tape_;
  std::size_t id_;
};

inline const Tensor& Variable::value() const { return tape_->value(id_); }
inline const Shape& Variable::shape() const { return value().shape(); }
inline Tensor Variable::grad() const { return tape_->grad(id_); }

inline void Tape::backward(const Variable& loss) {
  check_owned(loss);
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.rank() != 1 || lv.size() != 1)
    throw UsageError("backward: loss must be a scalar of shape [1], got " +
                     lv.shape().to_string());
  if (!recording_) throw UsageError("backward: tape is not recording");
  if (backward_done_)
    throw UsageError("backward: already run; call reset_gradients() first");
  backward_done_ = true;
  accumulate(loss.id(), Tensor::scalar(1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad || !n.backward) continue;
    BackwardContext ctx(*this, i);
    n.backward(ctx);
  }
}

// ---------------------------------------------------------------------------
// Differentiable tensor-core operations.

namespace ad {

inline Variable add(const Variable& a, const Variable& b) {
  Variable in[] = {a, b};
  return a.tape()->record(OpKind::kAdd, in, umix::add(a.value(), b.value()),
                          [](BackwardContext& c) {
                            c.accumulate(0, c.grad_output());
                            c.accumulate(1, c.grad_output());
                          });
}

inline Variable sub(const Variable& a, const Variable& b) {
  Variable in[] = {a, b};
  return a.tape()->record(OpKind::kSub, in, umix::sub(a.value(), b.value()),
                          [](BackwardContext& c) {
                            c.accumulate(0, c.grad_output());
                            if (c.needs_grad(1))
                              c.accumulate(1, umix::scale(c.grad_output(), -1.0));
                          });
}

inline Variable mul(const Variable& a, const Variable& b) {
  Variable in[] = {a, b};
  return a.tape()->record(
      OpKind::kMul, in, umix::mul(a.value(), b.value()),
      [](BackwardContext& c) {
        if (c.needs_grad(0)) c.accumulate(0, umix::mul(c.grad_output(), c.input(1)));
        if (c.needs_grad(1)) c.accumulate(1, umix::mul(c.grad_output(), c.input(0)));
      });
}

inline Variable scale(const Variable& a, double s) {
  Variable in[] = {a};
  return a.tape()->record(OpKind::kScale, in, umix::scale(a.value(), s),
                          [s](BackwardContext& c) {
                            c.accumulate(0, umix::scale(c.grad_output(), s));
                          });
}

inline Variable add_row(const Variable& x, const Variable& bias) {
  Variable in[] = {x, bias};
  return x.tape()->record(
      OpKind::kAddRow, in, umix::add_row(x.value(), bias.value()),
      [](BackwardContext& c) {
        const Tensor& g = c.grad_output();
        c.accumulate(0, g);
        if (c.needs_grad(1)) {
          const std::size_t n = g.dim(1);
          Tensor gb(c.input(1).shape());
          for (std::size_t r = 0; r < g.dim(0); ++r)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
          c.accumulate(1, gb);
        }
      });
}

inline Variable matmul(const Variable& a, const Variable& b) {
  Variable in[] = {a, b};
  return a.tape()->record(
      OpKind::kMatmul, in, umix::matmul(a.value(), b.value()),
      [](BackwardContext& c) {
        if (c.needs_grad(0)) c.accumulate(0, matmul_nt(c.grad_output(), c.input(1)));
        if (c.needs_grad(1)) c.accumulate(1, matmul_tn(c.input(0), c.grad_output()));
      });
}

inline Variable transpose(const Variable& x) {
  Variable in[] = {x};
  return x.tape()->record(OpKind::kTranspose, in, transpose_2d(x.value()),
                          [](BackwardContext& c) {
                            c.accumulate(0, transpose_2d(c.grad_output()));
                          });
}

inline Variable reshape(const Variable& x, Shape shape) {
  Variable in[] = {x};
  return x.tape()->record(OpKind::kReshape, in,
                          umix::reshape(x.value(), std::move(shape)),
                          [](BackwardContext& c) {
                            c.accumulate(0, umix::reshape(c.grad_output(),
                                                          c.input(0).shape()));
                          });
}

inline Variable sum(const Variable& x) {
  Variable in[] = {x};
  return x.tape()->record(OpKind::kSum, in, Tensor::scalar(umix::sum(x.value())),
                          [](BackwardContext& c) {
                            c.accumulate(0, Tensor::full(c.input(0).shape(),
                                                         c.grad_output()[0]));
                          });
}

inline Variable softmax_rows(const Variable& x) {
  Variable in[] = {x};
  return x.tape()->record(
      OpKind::kSoftmaxRows, in, umix::softmax_rows(x.value()),
      [](BackwardContext& c) {
        // s * (g - <g, s>) per row.
        const Tensor& s = c.output();
        const Tensor& g = c.grad_output();
        const std::size_t m = s.dim(0), p = s.dim(1);
        Tensor gx(s.shape());
        for (std::size_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < p; ++j) dot += g[i * p + j] * s[i * p + j];
          for (std::size_t j = 0; j < p; ++j)
            gx[i * p + j] = s[i * p + j] * (g[i * p + j] - dot);
        }
        c.accumulate(0, gx);
      });
}

inline Variable avg_pool(const Variable& x, std::size_t kernel,
                         std::size_t stride) {
  Variable in[] = {x};
  return x.tape()->record(
      OpKind::kAvgPool, in, umix::avg_pool(x.value(), kernel, stride),
      [kernel](BackwardContext& c) {
        const Tensor& g = c.grad_output();
        const Shape& xs = c.input(0).shape();
        const std::size_t w = xs[1], ch = xs[2];
        const std::size_t oh = g.dim(0), ow = g.dim(1);
        const double inv = 1.0 / static_cast<double>(kernel * kernel);
        Tensor gx(xs);
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            for (std::size_t dy = 0; dy < kernel; ++dy)
              for (std::size_t dx = 0; dx < kernel; ++dx)
                for (std::size_t k = 0; k < ch; ++k)
                  gx[((y * kernel + dy) * w + xx * kernel + dx) * ch + k] =
                      g[(y * ow + xx) * ch + k] * inv;
        c.accumulate(0, gx);
      });
}

inline Variable bilinear_upsample(const Variable& x, std::size_t out_h,
                                  std::size_t out_w) {
  Variable in[] = {x};
  return x.tape()->record(
      OpKind::kBilinearUpsample, in,
      umix::bilinear_upsample(x.value(), out_h, out_w),
      [out_h, out_w](BackwardContext& c) {
        const Shape& xs = c.input(0).shape();
        const std::size_t h = xs[0], w = xs[1], ch = xs[2];
        const auto ty = detail::bilinear_taps(h, out_h);
        const auto tx = detail::bilinear_taps(w, out_w);
        const Tensor& g = c.grad_output();
        Tensor gx(xs);
        for (std::size_t y = 0; y < out_h; ++y) {
          const double wy1 = ty[y].frac, wy0 = 1.0 - wy1;
          for (std::size_t xx = 0; xx < out_w; ++xx) {
            const double wx1 = tx[xx].frac, wx0 = 1.0 - wx1;
            const double* go = g.data().data() + (y * out_w + xx) * ch;
            double* g00 = gx.data().data() + (ty[y].lo * w + tx[xx].lo) * ch;
            double* g01 = gx.data().data() + (ty[y].lo * w + tx[xx].hi) * ch;
            double* g10 = gx.data().data() + (ty[y].hi * w + tx[xx].lo) * ch;
            double* g11 = gx.data().data() + (ty[y].hi * w + tx[xx].hi) * ch;
            for (std::size_t k = 0; k < ch; ++k) {
              g00[k] += go[k] * wy0 * wx0;
              g01[k] += go[k] * wy0 * wx1;
              g10[k] += go[k] * wy1 * wx0;
              g11[k] += go[k] * wy1 * wx1;
            }
          }
        }
        c.accumulate(0, gx);
      });
}

inline Variable concat_channels(std::span<const Variable> xs) {
  if (xs.empty()) throw DimensionError("concat_channels: empty input list");
  std::vector<Tensor> values;
  values.reserve(xs.size());
  for (const Variable& v : xs) values.push_back(v.value());
  return xs[0].tape()->record(
      OpKind::kConcatChannels, xs, umix::concat_channels(values),
      [](BackwardContext& c) {
        const Tensor& g = c.grad_output();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < c.input_count(); ++k) {
          const std::size_t width = c.input(k).shape().back();
          if (c.needs_grad(k)) c.accumulate(k, slice_channels(g, offset, width));
          offset += width;
        }
      });
}

inline Variable slice_channels(const Variable& x, std::size_t begin,
                               std::size_t count) {
  Variable in[] = {x};
  return x.tape()->record(
      OpKind::kSliceChannels, in, umix::slice_channels(x.value(), begin, count),
      [begin, count](BackwardContext& c) {
        const Tensor& g = c.grad_output();
        Tensor gx(c.input(0).shape());
        const std::size_t width = gx.shape().back();
        const std::size_t rows = gx.size() / width;
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(g.data().begin() + r * count, count,
                      gx.data().begin() + r * width + begin);
        c.accumulate(0, gx);
      });
}

inline Variable pixel_unshuffle(const Variable& x, std::size_t r) {
  Variable in[] = {x};
  return x.tape()->record(
      OpKind::kPixelUnshuffle, in, umix::pixel_unshuffle(x.value(), r),
      [r](BackwardContext& c) {
        const Shape& xs = c.input(0).shape();
        const std::size_t w = xs[1], ch = xs[2];
        const Tensor& g = c.grad_output();
        const std::size_t oh = g.dim(0), ow = g.dim(1), oc = g.dim(2);
        Tensor gx(xs);
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            for (std::size_t dy = 0; dy < r; ++dy)
              for (std::size_t dx = 0; dx < r; ++dx)
                std::copy_n(
                    g.data().begin() + (y * ow + xx) * oc + (dy * r + dx) * ch,
                    ch,
                    gx.data().begin() + ((y * r + dy) * w + xx * r + dx) * ch);
        c.accumulate(0, gx);
      });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct LeafGradCheck {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  /// Gradient is identically zero by construction; judged on absolute size.
  bool structural_zero = false;
  bool passed = true;
};

/// Bounds for leaves whose gradient is identically zero: the reverse-mode
/// value must vanish and the central difference must stay at round-off level.
inline constexpr double kStructuralZeroAnalytic = 1e-12;
inline constexpr double kStructuralZeroNumeric = 1e-8;

struct GradCheckReport {
  double tolerance = 0.0;
  double epsilon = 0.0;
  std::vector<LeafGradCheck> leaves;

  bool passed() const {
    for (const auto& l : leaves)
      if (!l.passed) return false;
    return true;
  }
  /// Maximum over leaves judged by relative error.
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& l : leaves)
      if (!l.structural_zero) m = std::max(m, l.max_rel_error);
    return m;
  }
};

/// Builds a scalar loss from leaf variables given in the same order as the
/// `leaves` passed to grad_check.
using GraphBuilder = std::function<Variable(Tape&, std::span<const Variable>)>;

/// Compares reverse-mode gradients with central differences
/// (f(x+eps) - f(x-eps)) / 2eps, using relative error
/// |a - n| / max(|a|, |n|, 1e-8) per element. Leaves named in
/// `structural_zero` are instead required to have a vanishing gradient.
inline GradCheckReport grad_check(
    const GraphBuilder& f, std::vector<NamedTensor> leaves, double eps,
    double tol, const std::vector<std::string>& structural_zero = {}) {
  if (!(eps > 1e-7 && eps < 1e-3))
    throw UsageError("grad_check: epsilon must lie in (1e-7, 1e-3)");

  auto evaluate = [&](const std::vector<NamedTensor>& ls) {
    Tape tape(false);
    std::vector<Variable> vars;
    vars.reserve(ls.size());
    for (const auto& l : ls) vars.push_back(tape.leaf(l.value, l.name));
    Variable out = f(tape, vars);
    if (out.value().size() != 1)
      throw UsageError("grad_check: graph must produce a scalar");
    return out.value()[0];
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Variable> vars;
    for (const auto& l : leaves) vars.push_back(tape.leaf(l.value, l.name));
    Variable out = f(tape, vars);
    tape.backward(out);
    for (const Variable& v : vars) analytic.push_back(v.grad());
  }

  GradCheckReport report;
  report.tolerance = tol;
  report.epsilon = eps;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    LeafGradCheck r;
    r.name = leaves[li].name;
    r.elements = leaves[li].value.size();
    for (std::size_t e = 0; e < leaves[li].value.size(); ++e) {
      const double orig = leaves[li].value[e];
      leaves[li].value[e] = orig + eps;
      const double fp = evaluate(leaves);
      leaves[li].value[e] = orig - eps;
      const double fm = evaluate(leaves);
      leaves[li].value[e] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[li][e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (e == 0 || rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_index = e;
        r.worst_analytic = a;
        r.worst_numeric = numeric;
      }
      r.max_abs_analytic = std::max(r.max_abs_analytic, std::abs(a));
      r.max_abs_numeric = std::max(r.max_abs_numeric, std::abs(numeric));
    }
    r.structural_zero =
        std::find(structural_zero.begin(), structural_zero.end(), r.name) !=
        structural_zero.end();
    r.passed = r.structural_zero
                   ? r.max_abs_analytic <= kStructuralZeroAnalytic &&
                         r.max_abs_numeric <= kStructuralZeroNumeric
                   : r.max_rel_error <= tol;
    report.leaves.push_back(std::move(r));
  }
  return report;
}

}  // namespace umix
