#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "volt4d/conv.hpp"
#include "volt4d/error.hpp"
#include "volt4d/layers.hpp"
#include "volt4d/params.hpp"
#include "volt4d/tensor.hpp"

namespace volt4d {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Define-by-run recorder. Each op evaluates eagerly, stores its output and
/// a closure that maps the output gradient onto its inputs and parameters.
/// Nodes are appended in evaluation order, so reverse order is a valid
/// topological order for the backward sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out, Gradients& grads)>;

  explicit Tape(const ParamStore& params, Conv4dStrategy strategy = Conv4dStrategy::Direct)
      : params_(&params), strategy_(strategy) {}

  const ParamStore& params() const noexcept { return *params_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Tensor& value(Var v) const { return node(v).value; }

  /// Gradient of the last backward() seed with respect to `v`; zeros if the
  /// value did not influence the output.
  Tensor grad(Var v) const {
    if (!did_backward_) fail(ErrorKind::State, "gradient requested before backward()");
    const auto& g = grads_.at(v.id);
    return g ? *g : Tensor::zeros(node(v).value.shape());
  }

  /// Leaf value. Gradients flow into it only when `requires_grad` is set.
  Var input(Tensor value, bool requires_grad = false) {
    nodes_.push_back({std::move(value), nullptr, requires_grad});
    return Var{nodes_.size() - 1};
  }

  bool requires_grad(Var v) const { return node(v).requires_grad; }

  Var conv(Var x, const ConvSpec& spec, std::size_t param) {
    const LayerParams& p = param_at(param);
    Tensor out = spec.rank() == 3 ? conv3d_apply(value(x), spec, p) : conv4d_apply(value(x), spec, p, strategy_);
    return push(std::move(out), [x, spec, param](Tape& t, const Tensor& g, Gradients& grads) {
      const Tensor& in = t.value(x);
      Tensor* gin = t.requires_grad(x) ? &t.grad_slot(x) : nullptr;
      conv_backward(in, spec, t.param_at(param).weight, g, grads.weight[param], grads.bias[param], gin);
    });
  }

  Var pool(Var x, std::vector<std::size_t> window) {
    Tensor out = avg_pool_apply(value(x), window);
    return push(std::move(out), [x, window = std::move(window)](Tape& t, const Tensor& g, Gradients&) {
      t.grad_slot(x) += avg_pool_backward(t.value(x).shape(), window, g);
    });
  }

  Var activation(Var x, Activation kind) {
    Tensor out = activation_apply(value(x), kind);
    const std::size_t self = nodes_.size();
    return push(std::move(out), [x, kind, self](Tape& t, const Tensor& g, Gradients&) {
      t.grad_slot(x) += activation_backward(t.value(x), t.nodes_[self].value, g, kind);
    });
  }

  Var relu(Var x) { return activation(x, Activation::Relu); }
  Var sigmoid(Var x) { return activation(x, Activation::Sigmoid); }
  Var tanh(Var x) { return activation(x, Activation::Tanh); }

  Var dense(Var x, std::size_t param) {
    Tensor out = dense_apply(value(x), param_at(param));
    return push(std::move(out), [x, param](Tape& t, const Tensor& g, Gradients& grads) {
      t.grad_slot(x) += dense_backward(t.value(x), t.param_at(param).weight, g, grads.weight[param], grads.bias[param]);
    });
  }

  Var concat(std::vector<Var> xs, std::size_t axis) {
    std::vector<Tensor> parts;
    parts.reserve(xs.size());
    for (auto v : xs) parts.push_back(value(v));
    Tensor out = volt4d::concat(std::span<const Tensor>(parts), axis);
    return push(std::move(out), [xs = std::move(xs), axis](Tape& t, const Tensor& g, Gradients&) {
      std::size_t begin = 0;
      for (auto v : xs) {
        const std::size_t len = t.value(v).dim(axis);
        t.grad_slot(v) += slice(g, axis, begin, len);
        begin += len;
      }
    });
  }

  Var mean(Var x, std::vector<std::size_t> axes) {
    Tensor out = reduce_mean(value(x), axes);
    return push(std::move(out), [x, axes = std::move(axes)](Tape& t, const Tensor& g, Gradients&) {
      // Each input element receives the gradient of its output slot / slab size.
      const Tensor& in = t.value(x);
      std::vector<bool> reduced(in.rank(), false);
      for (auto a : axes) reduced[a] = true;
      Shape keep_stride(in.rank(), 0);
      std::size_t stride = 1;
      for (std::size_t i = in.rank(); i-- > 0;)
        if (!reduced[i]) {
          keep_stride[i] = stride;
          stride *= in.dim(i);
        }
      const double inv = static_cast<double>(g.size()) / static_cast<double>(in.size());
      Tensor& gin = t.grad_slot(x);
      std::vector<std::size_t> idx(in.rank(), 0);
      std::size_t o = 0;
      for (std::size_t flat = 0; flat < in.size(); ++flat) {
        gin[flat] += g[o] * inv;
        for (std::size_t ax = in.rank(); ax-- > 0;) {
          if (++idx[ax] < in.dim(ax)) {
            o += keep_stride[ax];
            break;
          }
          o -= keep_stride[ax] * (in.dim(ax) - 1);
          idx[ax] = 0;
        }
      }
    });
  }

  Var reshape(Var x, Shape shape) {
    Tensor out = value(x).reshaped(std::move(shape));
    return push(std::move(out), [x](Tape& t, const Tensor& g, Gradients&) {
      t.grad_slot(x) += g.reshaped(t.value(x).shape());
    });
  }

  Var add(Var a, Var b) {
    Tensor out = value(a);
    out += value(b);
    return push(std::move(out), [a, b](Tape& t, const Tensor& g, Gradients&) {
      t.grad_slot(a) += g;
      t.grad_slot(b) += g;
    });
  }

  Var sub(Var a, Var b) {
    const Tensor& vb = value(b);
    Tensor out = value(a);
    out.require_same_shape(vb, "sub");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return push(std::move(out), [a, b](Tape& t, const Tensor& g, Gradients&) {
      t.grad_slot(a) += g;
      Tensor& gb = t.grad_slot(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  }

  Var mul(Var a, Var b) {
    const Tensor& vb = value(b);
    Tensor out = value(a);
    out.require_same_shape(vb, "mul");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return push(std::move(out), [a, b](Tape& t, const Tensor& g, Gradients&) {
      const Tensor& va = t.value(a);
      const Tensor& vb2 = t.value(b);
      Tensor& ga = t.grad_slot(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
      Tensor& gb = t.grad_slot(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    });
  }

  /// Reverse sweep from `out` seeded with `seed` (dL/d out). Parameter
  /// gradients are accumulated into `grads`.
  void backward(Var out, const Tensor& seed, Gradients& grads) {
    if (nodes_.empty()) fail(ErrorKind::State, "backward() called without a recorded forward pass");
    value(out).require_same_shape(seed, "backward seed");
    if (grads.weight.size() != params_->size()) fail(ErrorKind::State, "gradient buffer does not match parameters");
    grads_.assign(nodes_.size(), std::nullopt);
    grads_[out.id] = seed;
    for (std::size_t i = out.id + 1; i-- > 0;) {
      if (!grads_[i] || !nodes_[i].backward || !nodes_[i].requires_grad) continue;
      nodes_[i].backward(*this, *grads_[i], grads);
    }
    did_backward_ = true;
  }

  const LayerParams& param_at(std::size_t i) const {
    if (i >= params_->size()) fail(ErrorKind::State, "parameter index out of range");
    return (*params_)[i];
  }

 private:
  struct Node {
    Tensor value;
    Backward backward;
    bool requires_grad = true;
  };

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) fail(ErrorKind::State, "variable does not belong to this tape");
    return nodes_[v.id];
  }

  Var push(Tensor value, Backward backward) {
    nodes_.push_back({std::move(value), std::move(backward), true});
    return Var{nodes_.size() - 1};
  }

  Tensor& grad_slot(Var v) {
    auto& slot = grads_[v.id];
    if (!slot) slot = Tensor::zeros(nodes_[v.id].value.shape());
    return *slot;
  }

  const ParamStore* params_;
  Conv4dStrategy strategy_;
  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor>> grads_;
  bool did_backward_ = false;
};

}  // namespace volt4d
