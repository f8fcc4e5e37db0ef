#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "volt4d/conv.hpp"
#include "volt4d/params.hpp"
#include "volt4d/rng.hpp"
#include "volt4d/tape.hpp"

namespace volt4d {

enum class ConvDim { Conv3d = 3, Conv4d = 4 };

inline ConvSpec same_conv(ConvDim dim, std::size_t in, std::size_t out, std::size_t kernel,
                          std::size_t temporal_kernel) {
  if (dim == ConvDim::Conv3d) return ConvSpec::same(in, out, {kernel, kernel, kernel});
  return ConvSpec::same(in, out, {temporal_kernel, kernel, kernel, kernel});
}

/// Appends He-initialised parameters for `spec` and returns their index.
inline std::size_t add_conv_params(ParamStore& store, const std::string& name, const ConvSpec& spec,
                                   std::uint64_t seed) {
  store.push_back(he_uniform(name, spec.weight_shape(), spec.fan_in(), spec.out_channels, seed));
  return store.size() - 1;
}

// ---------------------------------------------------------------------------
// DenseNet block

/// Inner layer i computes conv(relu(concat(x, y_1, ..., y_{i-1}))); the block
/// returns concat(x, y_1, ..., y_L) along the channel axis.
struct DenseBlock {
  ConvDim dim = ConvDim::Conv3d;
  std::vector<ConvSpec> specs;
  std::vector<std::size_t> params;

  std::size_t in_channels() const { return specs.front().in_channels; }
  std::size_t growth_rate() const { return specs.front().out_channels; }
  std::size_t out_channels() const { return in_channels() + specs.size() * growth_rate(); }
  std::size_t channel_axis() const { return dim == ConvDim::Conv3d ? 0 : 1; }
};

inline DenseBlock make_dense_block(ParamStore& store, const std::string& name, ConvDim dim, std::size_t in_channels,
                                   std::size_t growth_rate, std::size_t layers, std::size_t kernel,
                                   std::size_t temporal_kernel, std::uint64_t seed) {
  if (layers == 0) fail(ErrorKind::Config, name + ": a dense block needs at least one layer");
  if (growth_rate == 0) fail(ErrorKind::Config, name + ": growth rate must be >= 1");
  DenseBlock block;
  block.dim = dim;
  std::size_t channels = in_channels;
  for (std::size_t i = 0; i < layers; ++i) {
    ConvSpec spec = same_conv(dim, channels, growth_rate, kernel, temporal_kernel);
    block.params.push_back(
        add_conv_params(store, name + ".layer" + std::to_string(i), spec, derive_seed(seed, i)));
    block.specs.push_back(std::move(spec));
    channels += growth_rate;
  }
  return block;
}

inline Var dense_block(Tape& tape, Var x, const DenseBlock& block) {
  std::vector<Var> features{x};
  for (std::size_t i = 0; i < block.specs.size(); ++i) {
    const Var joined = features.size() == 1 ? features[0] : tape.concat(features, block.channel_axis());
    features.push_back(tape.conv(tape.relu(joined), block.specs[i], block.params[i]));
  }
  return tape.concat(features, block.channel_axis());
}

inline Tensor densenet_block_apply(const Tensor& input, const DenseBlock& block, const ParamStore& params) {
  Tape tape(params);
  return tape.value(dense_block(tape, tape.input(input), block));
}

// ---------------------------------------------------------------------------
// Convolutional GRU

struct GruState {
  Tensor hidden;  // (channels, depth, height, width)

  static GruState zeros(std::size_t channels, std::size_t d, std::size_t h, std::size_t w) {
    return {Tensor::zeros({channels, d, h, w})};
  }
};

/// Gate convolutions: input-to-hidden (W_*) and hidden-to-hidden (U_*), all
/// 3D with "same" padding.
struct GruCell {
  ConvSpec input_spec;
  ConvSpec hidden_spec;
  std::size_t wz, uz, wr, ur, wh, uh;

  std::size_t hidden_channels() const { return hidden_spec.out_channels; }
};

inline GruCell make_gru_cell(ParamStore& store, const std::string& name, std::size_t in_channels,
                             std::size_t hidden_channels, std::size_t kernel, std::uint64_t seed) {
  GruCell cell;
  cell.input_spec = ConvSpec::same(in_channels, hidden_channels, {kernel, kernel, kernel});
  cell.hidden_spec = ConvSpec::same(hidden_channels, hidden_channels, {kernel, kernel, kernel});
  cell.wz = add_conv_params(store, name + ".W_z", cell.input_spec, derive_seed(seed, 0));
  cell.uz = add_conv_params(store, name + ".U_z", cell.hidden_spec, derive_seed(seed, 1));
  cell.wr = add_conv_params(store, name + ".W_r", cell.input_spec, derive_seed(seed, 2));
  cell.ur = add_conv_params(store, name + ".U_r", cell.hidden_spec, derive_seed(seed, 3));
  cell.wh = add_conv_params(store, name + ".W_h", cell.input_spec, derive_seed(seed, 4));
  cell.uh = add_conv_params(store, name + ".U_h", cell.hidden_spec, derive_seed(seed, 5));
  return cell;
}

/// z = sigmoid(Wz*x + Uz*h), r = sigmoid(Wr*x + Ur*h),
/// h~ = tanh(Wh*x + Uh*(r.h)), h' = (1-z).h + z.h~
inline Var conv_gru_step(Tape& tape, Var x, Var h, const GruCell& cell) {
  const auto& xs = tape.value(x).shape();
  const auto& hs = tape.value(h).shape();
  if (xs.size() != 4 || hs.size() != 4 || xs[1] != hs[1] || xs[2] != hs[2] || xs[3] != hs[3])
    fail(ErrorKind::ShapeMismatch, "conv GRU input " + shape_string(xs) + " and state " + shape_string(hs) +
                                       " must share spatial extents");
  if (hs[0] != cell.hidden_channels())
    fail(ErrorKind::ShapeMismatch, "conv GRU state has " + std::to_string(hs[0]) + " channels, cell expects " +
                                       std::to_string(cell.hidden_channels()));
  const Var z = tape.sigmoid(tape.add(tape.conv(x, cell.input_spec, cell.wz), tape.conv(h, cell.hidden_spec, cell.uz)));
  const Var r = tape.sigmoid(tape.add(tape.conv(x, cell.input_spec, cell.wr), tape.conv(h, cell.hidden_spec, cell.ur)));
  const Var candidate =
      tape.tanh(tape.add(tape.conv(x, cell.input_spec, cell.wh), tape.conv(tape.mul(r, h), cell.hidden_spec, cell.uh)));
  return tape.add(h, tape.mul(z, tape.sub(candidate, h)));
}

inline GruState conv_gru_step(const Tensor& input, const GruState& state, const ParamStore& params,
                              const GruCell& cell) {
  Tape tape(params);
  const Var out = conv_gru_step(tape, tape.input(input), tape.input(state.hidden), cell);
  return {tape.value(out)};
}

}  // namespace volt4d
