#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "volt4d/tensor.hpp"

namespace volt4d {

/// Trainable weight/bias pair plus gradient accumulators of identical shape.
struct LayerParams {
  std::string name;
  Tensor weight;
  Tensor bias;
  Tensor grad_weight;
  Tensor grad_bias;

  LayerParams() = default;
  LayerParams(std::string n, Tensor w, Tensor b)
      : name(std::move(n)),
        weight(std::move(w)),
        bias(std::move(b)),
        grad_weight(Tensor::zeros(weight.shape())),
        grad_bias(Tensor::zeros(bias.shape())) {}

  void zero_grad() {
    grad_weight.fill(0.0);
    grad_bias.fill(0.0);
  }

  std::size_t count() const noexcept { return weight.size() + bias.size(); }
};

using ParamStore = std::vector<LayerParams>;

/// Gradient buffer detached from a ParamStore so that several workers can
/// backpropagate against one read-only parameter set.
struct Gradients {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  static Gradients like(const ParamStore& params) {
    Gradients g;
    g.weight.reserve(params.size());
    g.bias.reserve(params.size());
    for (const auto& p : params) {
      g.weight.push_back(Tensor::zeros(p.weight.shape()));
      g.bias.push_back(Tensor::zeros(p.bias.shape()));
    }
    return g;
  }

  void zero() {
    for (auto& t : weight) t.fill(0.0);
    for (auto& t : bias) t.fill(0.0);
  }

  Gradients& operator+=(const Gradients& other) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += other.weight[i];
      bias[i] += other.bias[i];
    }
    return *this;
  }

  void scale(double s) {
    for (auto& t : weight) t *= s;
    for (auto& t : bias) t *= s;
  }
};

inline void zero_grad(ParamStore& params) {
  for (auto& p : params) p.zero_grad();
}

inline void accumulate_into(ParamStore& params, const Gradients& grads) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].grad_weight += grads.weight[i];
    params[i].grad_bias += grads.bias[i];
  }
}

/// He-style fan-in scaled uniform weights, zero bias.
inline LayerParams he_uniform(std::string name, Shape weight_shape, std::size_t fan_in, std::size_t bias_len,
                              std::uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return LayerParams(std::move(name), Tensor::uniform(std::move(weight_shape), seed, -bound, bound),
                     Tensor::zeros({bias_len}));
}

}  // namespace volt4d
