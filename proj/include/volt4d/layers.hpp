#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "volt4d/error.hpp"
#include "volt4d/params.hpp"
#include "volt4d/tensor.hpp"

namespace volt4d {

// ---------------------------------------------------------------------------
// Average pooling. `window` has one entry per input axis (use 1 on axes that
// are not pooled). Windows must divide their axis; there is no implicit padding.

inline Shape pooled_shape(const Shape& in, std::span<const std::size_t> window) {
  if (window.size() != in.size())
    fail(ErrorKind::InvalidShape, "pool window rank " + std::to_string(window.size()) + " vs input rank " +
                                      std::to_string(in.size()));
  Shape out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (window[i] == 0) fail(ErrorKind::InvalidShape, "pool window extent must be >= 1");
    if (window[i] > in[i])
      fail(ErrorKind::InvalidShape, "pool window " + std::to_string(window[i]) + " larger than axis " +
                                        std::to_string(i) + " of length " + std::to_string(in[i]));
    if (in[i] % window[i] != 0)
      fail(ErrorKind::InvalidShape, "pool window " + std::to_string(window[i]) + " does not divide axis " +
                                        std::to_string(i) + " of length " + std::to_string(in[i]));
    out[i] = in[i] / window[i];
  }
  return out;
}

namespace detail {

// Calls fn(in_flat, out_flat) for every input element.
template <typename Fn>
void for_each_pool_pair(const Shape& in, const Shape& out, std::span<const std::size_t> window, Fn&& fn) {
  const std::size_t rank = in.size();
  const Shape out_strides = row_major_strides(out);
  std::vector<std::size_t> idx(rank, 0), phase(rank, 0);
  std::size_t out_off = 0;
  const std::size_t total = shape_numel(in);
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(flat, out_off);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      if (++phase[ax] == window[ax]) {
        phase[ax] = 0;
        out_off += out_strides[ax];
      }
      if (idx[ax] < in[ax]) break;
      idx[ax] = 0;
      out_off -= out_strides[ax] * out[ax];
    }
  }
}

}  // namespace detail

inline Tensor avg_pool_apply(const Tensor& input, std::span<const std::size_t> window) {
  const Shape out_shape = pooled_shape(input.shape(), window);
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(shape_numel(Shape(window.begin(), window.end())));
  detail::for_each_pool_pair(input.shape(), out_shape, window,
                             [&](std::size_t i, std::size_t o) { out[o] += input[i]; });
  out *= inv;
  return out;
}

inline Tensor avg_pool_apply(const Tensor& input, std::initializer_list<std::size_t> window) {
  return avg_pool_apply(input, std::span<const std::size_t>(window.begin(), window.size()));
}

inline Tensor avg_pool_backward(const Shape& in_shape, std::span<const std::size_t> window, const Tensor& grad_out) {
  const Shape out_shape = pooled_shape(in_shape, window);
  if (grad_out.shape() != out_shape) fail(ErrorKind::ShapeMismatch, "pool backward: gradient shape mismatch");
  Tensor grad(in_shape);
  const double inv = 1.0 / static_cast<double>(shape_numel(Shape(window.begin(), window.end())));
  detail::for_each_pool_pair(in_shape, out_shape, window,
                             [&](std::size_t i, std::size_t o) { grad[i] = grad_out[o] * inv; });
  return grad;
}

// ---------------------------------------------------------------------------
// Fully connected: y = W x + b, W is (out, in).

inline Tensor dense_apply(const Tensor& input, const LayerParams& params) {
  if (params.weight.rank() != 2) fail(ErrorKind::InvalidShape, "dense weight must be a matrix");
  const std::size_t rows = params.weight.dim(0), cols = params.weight.dim(1);
  if (input.size() != cols)
    fail(ErrorKind::ShapeMismatch, "dense input length " + std::to_string(input.size()) + " vs weight columns " +
                                       std::to_string(cols));
  if (params.bias.size() != rows) fail(ErrorKind::ShapeMismatch, "dense bias length mismatch");
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = params.bias[r];
    const double* w = params.weight.ptr() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += w[c] * input[c];
    out[r] = s;
  }
  return out;
}

/// Accumulates dL/dW = g x^T and dL/db = g; returns dL/dx = W^T g.
inline Tensor dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, Tensor& grad_weight,
                             Tensor& grad_bias) {
  const std::size_t rows = weight.dim(0), cols = weight.dim(1);
  Tensor grad_in({cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = grad_out[r];
    grad_bias[r] += g;
    const double* w = weight.ptr() + r * cols;
    double* gw = grad_weight.ptr() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      gw[c] += g * input[c];
      grad_in[c] += w[c] * g;
    }
  }
  return grad_in.reshaped(input.shape());
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation { Relu, Sigmoid, Tanh };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline double sigmoid(double x) {
  // Split form keeps exp() from overflowing for large |x|.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor activation_apply(const Tensor& input, Activation kind) {
  Tensor out = input;
  for (auto& v : out.data()) {
    switch (kind) {
      case Activation::Relu: v = v < 0.0 ? 0.0 : v; break;
      case Activation::Sigmoid: v = sigmoid(v); break;
      case Activation::Tanh: v = std::tanh(v); break;
    }
  }
  return out;
}

/// Derivative expressed through the forward output y (and input x for relu).
inline Tensor activation_backward(const Tensor& input, const Tensor& output, const Tensor& grad_out,
                                  Activation kind) {
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    switch (kind) {
      case Activation::Relu: grad[i] = input[i] > 0.0 ? grad_out[i] : 0.0; break;
      case Activation::Sigmoid: grad[i] = grad_out[i] * output[i] * (1.0 - output[i]); break;
      case Activation::Tanh: grad[i] = grad_out[i] * (1.0 - output[i] * output[i]); break;
    }
  }
  return grad;
}

}  // namespace volt4d
