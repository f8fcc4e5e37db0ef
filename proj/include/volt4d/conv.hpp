#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "volt4d/error.hpp"
#include "volt4d/kernels.hpp"
#include "volt4d/params.hpp"
#include "volt4d/tensor.hpp"

namespace volt4d {

/// Convolution geometry. `kernel`, `stride` and `padding` have one entry per
/// convolved axis: (depth, height, width) for 3D, (time, depth, height, width)
/// for 4D.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  std::vector<std::size_t> padding;

  /// Stride 1 and "same" zero padding; kernel extents must be odd.
  static ConvSpec same(std::size_t in_channels, std::size_t out_channels, std::vector<std::size_t> kernel) {
    ConvSpec s;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    s.stride.assign(kernel.size(), 1);
    for (auto k : kernel) {
      if (k % 2 == 0) fail(ErrorKind::Config, "same padding needs odd kernel extents");
      s.padding.push_back(k / 2);
    }
    s.kernel = std::move(kernel);
    return s;
  }

  std::size_t rank() const noexcept { return kernel.size(); }

  std::size_t taps() const { return shape_numel(kernel); }

  Shape weight_shape() const {
    Shape s{out_channels, in_channels};
    s.insert(s.end(), kernel.begin(), kernel.end());
    return s;
  }

  std::size_t fan_in() const { return in_channels * taps(); }

  void validate() const {
    if (kernel.size() != 3 && kernel.size() != 4)
      fail(ErrorKind::InvalidShape, "convolution kernel must have 3 or 4 axes");
    if (stride.size() != kernel.size() || padding.size() != kernel.size())
      fail(ErrorKind::InvalidShape, "stride/padding rank must match kernel rank");
    if (in_channels == 0 || out_channels == 0) fail(ErrorKind::InvalidShape, "channel counts must be >= 1");
    for (std::size_t i = 0; i < kernel.size(); ++i)
      if (kernel[i] == 0 || stride[i] == 0) fail(ErrorKind::InvalidShape, "kernel and stride extents must be >= 1");
  }

  /// (L + 2p - k) / s + 1 on convolved axis `axis`.
  std::size_t out_extent(std::size_t axis, std::size_t length) const {
    const std::size_t padded = length + 2 * padding[axis];
    if (padded < kernel[axis])
      fail(ErrorKind::InvalidShape, "kernel extent " + std::to_string(kernel[axis]) + " exceeds padded length " +
                                        std::to_string(padded) + " on conv axis " + std::to_string(axis));
    return (padded - kernel[axis]) / stride[axis] + 1;
  }
};

enum class Conv4dStrategy { Direct, TemporalDecomposition };

namespace detail {

/// Every convolution is lowered to this 4-axis form; a 3D convolution is the
/// case T = kt = st = 1, pt = 0. Input layout (T, C, D, H, W), output layout
/// (To, Co, Do, Ho, Wo).
struct ConvGeometry {
  std::size_t T, C, D, H, W;
  std::size_t Co;
  std::size_t k[4], s[4], p[4];
  std::size_t To, Do, Ho, Wo;

  std::size_t rows() const { return C * k[0] * k[1] * k[2] * k[3]; }
  std::size_t out_spatial() const { return Do * Ho * Wo; }
  std::size_t cols() const { return To * out_spatial(); }
};

inline ConvGeometry geometry(const ConvSpec& spec, const Shape& in) {
  spec.validate();
  ConvGeometry g{};
  if (spec.rank() == 3) {
    if (in.size() != 4) fail(ErrorKind::ShapeMismatch, "conv3d expects (C,D,H,W), got " + shape_string(in));
    g.T = 1;
    g.C = in[0];
    g.D = in[1];
    g.H = in[2];
    g.W = in[3];
    g.k[0] = g.s[0] = 1;
    g.p[0] = 0;
    for (int a = 0; a < 3; ++a) {
      g.k[a + 1] = spec.kernel[a];
      g.s[a + 1] = spec.stride[a];
      g.p[a + 1] = spec.padding[a];
    }
    g.To = 1;
  } else {
    if (in.size() != 5) fail(ErrorKind::ShapeMismatch, "conv4d expects (T,C,D,H,W), got " + shape_string(in));
    g.T = in[0];
    g.C = in[1];
    g.D = in[2];
    g.H = in[3];
    g.W = in[4];
    for (int a = 0; a < 4; ++a) {
      g.k[a] = spec.kernel[a];
      g.s[a] = spec.stride[a];
      g.p[a] = spec.padding[a];
    }
    g.To = spec.out_extent(0, g.T);
  }
  if (g.C != spec.in_channels)
    fail(ErrorKind::ShapeMismatch, "input has " + std::to_string(g.C) + " channels, spec expects " +
                                       std::to_string(spec.in_channels));
  g.Co = spec.out_channels;
  const std::size_t off = spec.rank() == 3 ? 0 : 1;
  g.Do = spec.out_extent(off + 0, g.D);
  g.Ho = spec.out_extent(off + 1, g.H);
  g.Wo = spec.out_extent(off + 2, g.W);
  return g;
}

/// Range of output indices o with 0 <= o*s + tap - pad < len.
inline void valid_range(std::size_t out_len, std::size_t len, std::size_t s, std::size_t tap, std::size_t pad,
                        std::size_t& lo, std::size_t& hi) {
  // o*s >= pad - tap
  lo = tap >= pad ? 0 : (pad - tap + s - 1) / s;
  // o*s + tap - pad <= len - 1
  const long long top = static_cast<long long>(len) - 1 + static_cast<long long>(pad) - static_cast<long long>(tap);
  hi = top < 0 ? 0 : std::min(out_len, static_cast<std::size_t>(top) / s + 1);
  if (lo > hi) lo = hi;
}

/// Visits every (row, column-run) pair of the lowered matrix. The callback
/// gets the row, the first output column of a contiguous run along the width
/// axis, the matching input offset, the run length and the input step.
template <typename Fn>
void for_each_patch_run(const ConvGeometry& g, Fn&& fn) {
  const std::size_t S = g.out_spatial();
  const std::size_t HW = g.H * g.W;
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.C; ++c)
    for (std::size_t a = 0; a < g.k[0]; ++a)
      for (std::size_t b = 0; b < g.k[1]; ++b)
        for (std::size_t e = 0; e < g.k[2]; ++e)
          for (std::size_t f = 0; f < g.k[3]; ++f, ++row) {
            std::size_t tlo, thi, dlo, dhi, hlo, hhi, wlo, whi;
            valid_range(g.To, g.T, g.s[0], a, g.p[0], tlo, thi);
            valid_range(g.Do, g.D, g.s[1], b, g.p[1], dlo, dhi);
            valid_range(g.Ho, g.H, g.s[2], e, g.p[2], hlo, hhi);
            valid_range(g.Wo, g.W, g.s[3], f, g.p[3], wlo, whi);
            if (wlo >= whi) continue;
            for (std::size_t to = tlo; to < thi; ++to) {
              const std::size_t ti = to * g.s[0] + a - g.p[0];
              for (std::size_t od = dlo; od < dhi; ++od) {
                const std::size_t di = od * g.s[1] + b - g.p[1];
                for (std::size_t oh = hlo; oh < hhi; ++oh) {
                  const std::size_t hi = oh * g.s[2] + e - g.p[2];
                  const std::size_t col = to * S + (od * g.Ho + oh) * g.Wo + wlo;
                  const std::size_t in_off =
                      ((ti * g.C + c) * g.D + di) * HW + hi * g.W + (wlo * g.s[3] + f - g.p[3]);
                  fn(row, col, in_off, whi - wlo, g.s[3]);
                }
              }
            }
          }
}

inline std::vector<double> im2col(const ConvGeometry& g, const double* in) {
  const std::size_t N = g.cols();
  std::vector<double> col(g.rows() * N, 0.0);
  for_each_patch_run(g, [&](std::size_t row, std::size_t c0, std::size_t off, std::size_t n, std::size_t step) {
    double* dst = col.data() + row * N + c0;
    const double* src = in + off;
    if (step == 1)
      std::copy_n(src, n, dst);
    else
      for (std::size_t j = 0; j < n; ++j) dst[j] = src[j * step];
  });
  return col;
}

inline void col2im_acc(const ConvGeometry& g, const double* col, double* in_grad) {
  const std::size_t N = g.cols();
  for_each_patch_run(g, [&](std::size_t row, std::size_t c0, std::size_t off, std::size_t n, std::size_t step) {
    const double* src = col + row * N + c0;
    double* dst = in_grad + off;
    for (std::size_t j = 0; j < n; ++j) dst[j * step] += src[j];
  });
}

inline Shape output_shape(const ConvSpec& spec, const ConvGeometry& g) {
  if (spec.rank() == 3) return {g.Co, g.Do, g.Ho, g.Wo};
  return {g.To, g.Co, g.Do, g.Ho, g.Wo};
}

inline void check_params(const ConvSpec& spec, const LayerParams& params) {
  if (params.weight.shape() != spec.weight_shape())
    fail(ErrorKind::ShapeMismatch, "conv weight " + shape_string(params.weight.shape()) + " does not match spec " +
                                       shape_string(spec.weight_shape()));
  if (params.bias.shape() != Shape{spec.out_channels})
    fail(ErrorKind::ShapeMismatch, "conv bias length does not match out_channels");
}

/// Lowered convolution: one GEMM over all output positions.
inline Tensor conv_lowered(const Tensor& input, const ConvSpec& spec, const Tensor& weight, const Tensor* bias) {
  const ConvGeometry g = geometry(spec, input.shape());
  const std::size_t R = g.rows(), N = g.cols(), S = g.out_spatial();
  const auto col = im2col(g, input.ptr());
  std::vector<double> out_mat(g.Co * N);
  kernels::gemm_nn(g.Co, R, N, weight.ptr(), col.data(), out_mat.data());
  Tensor out(output_shape(spec, g));
  double* o = out.ptr();
  for (std::size_t to = 0; to < g.To; ++to)
    for (std::size_t co = 0; co < g.Co; ++co) {
      const double b = bias ? (*bias)[co] : 0.0;
      const double* src = out_mat.data() + co * N + to * S;
      double* dst = o + (to * g.Co + co) * S;
      for (std::size_t s = 0; s < S; ++s) dst[s] = src[s] + b;
    }
  return out;
}

}  // namespace detail

/// 3D cross-correlation of a (C_in, D, H, W) volume with zero padding.
inline Tensor conv3d_apply(const Tensor& input, const ConvSpec& spec, const LayerParams& params) {
  if (spec.rank() != 3) fail(ErrorKind::InvalidShape, "conv3d_apply needs a 3-axis kernel");
  detail::check_params(spec, params);
  return detail::conv_lowered(input, spec, params.weight, &params.bias);
}

/// 4D cross-correlation of a (T, C_in, D, H, W) sequence over (time, depth,
/// height, width). Both strategies compute the same function.
inline Tensor conv4d_apply(const Tensor& input, const ConvSpec& spec, const LayerParams& params,
                           Conv4dStrategy strategy = Conv4dStrategy::Direct) {
  if (spec.rank() != 4) fail(ErrorKind::InvalidShape, "conv4d_apply needs a 4-axis kernel");
  detail::check_params(spec, params);
  if (strategy == Conv4dStrategy::Direct) return detail::conv_lowered(input, spec, params.weight, &params.bias);

  // Temporal decomposition: out[t'] = bias + sum_a conv3d(x[t'*s + a - p], W[:, :, a]).
  const detail::ConvGeometry g = detail::geometry(spec, input.shape());
  ConvSpec spatial;
  spatial.in_channels = spec.in_channels;
  spatial.out_channels = spec.out_channels;
  spatial.kernel = {spec.kernel[1], spec.kernel[2], spec.kernel[3]};
  spatial.stride = {spec.stride[1], spec.stride[2], spec.stride[3]};
  spatial.padding = {spec.padding[1], spec.padding[2], spec.padding[3]};

  std::vector<Tensor> tap_weights;
  for (std::size_t a = 0; a < g.k[0]; ++a)
    tap_weights.push_back(slice(params.weight, 2, a, 1).reshaped(spatial.weight_shape()));

  const std::size_t frame = g.C * g.D * g.H * g.W;
  const std::size_t out_frame = g.Co * g.out_spatial();
  Tensor out(detail::output_shape(spec, g));
  for (std::size_t to = 0; to < g.To; ++to) {
    double* dst = out.ptr() + to * out_frame;
    for (std::size_t co = 0; co < g.Co; ++co) std::fill_n(dst + co * g.out_spatial(), g.out_spatial(), params.bias[co]);
    for (std::size_t a = 0; a < g.k[0]; ++a) {
      const long long ti = static_cast<long long>(to * g.s[0] + a) - static_cast<long long>(g.p[0]);
      if (ti < 0 || ti >= static_cast<long long>(g.T)) continue;
      Tensor x_t({g.C, g.D, g.H, g.W},
                 std::vector<double>(input.ptr() + static_cast<std::size_t>(ti) * frame,
                                     input.ptr() + (static_cast<std::size_t>(ti) + 1) * frame));
      const Tensor partial = detail::conv_lowered(x_t, spatial, tap_weights[a], nullptr);
      for (std::size_t i = 0; i < out_frame; ++i) dst[i] += partial[i];
    }
  }
  return out;
}

/// Reverse pass of conv3d/conv4d. Accumulates into `grad_weight`/`grad_bias`
/// and, when non-null, into `grad_input`.
inline void conv_backward(const Tensor& input, const ConvSpec& spec, const Tensor& weight, const Tensor& grad_out,
                          Tensor& grad_weight, Tensor& grad_bias, Tensor* grad_input) {
  const detail::ConvGeometry g = detail::geometry(spec, input.shape());
  const std::size_t R = g.rows(), N = g.cols(), S = g.out_spatial();
  if (grad_out.shape() != detail::output_shape(spec, g))
    fail(ErrorKind::ShapeMismatch, "conv backward: upstream gradient shape " + shape_string(grad_out.shape()));

  std::vector<double> G(g.Co * N);
  for (std::size_t to = 0; to < g.To; ++to)
    for (std::size_t co = 0; co < g.Co; ++co)
      std::copy_n(grad_out.ptr() + (to * g.Co + co) * S, S, G.data() + co * N + to * S);

  for (std::size_t co = 0; co < g.Co; ++co) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) s += G[co * N + n];
    grad_bias[co] += s;
  }

  const auto col = detail::im2col(g, input.ptr());
  kernels::gemm_nt_acc(g.Co, R, N, G.data(), col.data(), grad_weight.ptr());

  if (grad_input) {
    std::vector<double> gcol(R * N);
    kernels::gemm_tn(g.Co, R, N, weight.ptr(), G.data(), gcol.data());
    detail::col2im_acc(g, gcol.data(), grad_input->ptr());
  }
}

}  // namespace volt4d
