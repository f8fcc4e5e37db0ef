#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "volt4d/params.hpp"

namespace volt4d {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::size_t step_count = 0;
  std::vector<Tensor> first_moment;   // weight, bias, weight, bias, ...
  std::vector<Tensor> second_moment;

  static AdamState for_params(const ParamStore& params, AdamHyper hyper = {}) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& p : params) {
      s.first_moment.push_back(Tensor::zeros(p.weight.shape()));
      s.first_moment.push_back(Tensor::zeros(p.bias.shape()));
      s.second_moment.push_back(Tensor::zeros(p.weight.shape()));
      s.second_moment.push_back(Tensor::zeros(p.bias.shape()));
    }
    return s;
  }
};

namespace detail {

inline void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, const AdamHyper& h,
                        double correction1, double correction2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    param[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

}  // namespace detail

/// One bias-corrected Adam update driven by the accumulated grads in `params`.
inline void adam_step(ParamStore& params, AdamState& state) {
  if (state.first_moment.size() != 2 * params.size())
    fail(ErrorKind::State, "Adam state was built for a different parameter set");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.hyper.beta1, t);
  const double c2 = 1.0 - std::pow(state.hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    detail::adam_update(p.weight, p.grad_weight, state.first_moment[2 * i], state.second_moment[2 * i], state.hyper,
                        c1, c2);
    detail::adam_update(p.bias, p.grad_bias, state.first_moment[2 * i + 1], state.second_moment[2 * i + 1],
                        state.hyper, c1, c2);
  }
}

}  // namespace volt4d
