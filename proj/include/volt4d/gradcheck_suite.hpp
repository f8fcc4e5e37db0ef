#pragma once

// Finite-difference checks for every layer kind and every architecture on a
// tiny configuration (6^3 volumes, T = 3). Layer fragments also check the
// gradient with respect to their input by storing the input as an extra
// parameter tensor named "<fragment>.input".

#include <functional>
#include <string>
#include <vector>

#include "volt4d/gradcheck.hpp"
#include "volt4d/zoo.hpp"

namespace volt4d {

struct GradcheckCase {
  std::string name;
  GradcheckReport report;
};

/// 6^3 volumes, T = 3, narrow widths.
inline ModelConfig tiny_model_config() {
  ModelConfig c;
  c.sequence_length = 3;
  c.volume_size = {6, 6, 6};
  c.path_channels = {2, 3};
  c.cnn4d_channels = {2, 2, 3};
  c.gru_channels = 2;
  c.growth_rate = 2;
  c.blocks = 2;
  c.layers_per_block = 2;
  return c;
}

namespace detail {

// Builds the fragment output from the tape and the Vars of its input leaves.
using FragmentBuilder = std::function<Var(Tape&, const std::vector<Var>& inputs)>;

inline GradcheckCase check_fragment(const std::string& name, ParamStore params, const std::vector<Tensor>& inputs,
                                    const FragmentBuilder& build, const GradcheckOptions& opt,
                                    Conv4dStrategy strategy = Conv4dStrategy::Direct) {
  const std::size_t first = params.size();
  for (std::size_t i = 0; i < inputs.size(); ++i)
    params.emplace_back(name + ".input" + std::to_string(i), inputs[i], Tensor::zeros({1}));
  auto record = [&](Tape& tape, const ParamStore& p, bool track) {
    std::vector<Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) xs.push_back(tape.input(p[first + i].weight, track));
    return std::pair{xs, build(tape, xs)};
  };
  Tensor projection;
  {
    Tape probe(params, strategy);
    projection = loss_projection(probe.value(record(probe, params, false).second).shape(), derive_seed(opt.seed, 0x9C));
  }
  const FragmentLoss loss = [&](const ParamStore& p, Gradients* grads) {
    Tape tape(p, strategy);
    const auto [xs, out] = record(tape, p, grads != nullptr);
    const double value = projected_loss(tape, out, projection, grads);
    if (grads)
      for (std::size_t i = 0; i < xs.size(); ++i) grads->weight[first + i] += tape.grad(xs[i]);
    return value;
  };
  return {name, gradcheck(params, loss, opt)};
}

}  // namespace detail

inline std::vector<GradcheckCase> layer_gradchecks(const GradcheckOptions& opt = {}) {
  std::vector<GradcheckCase> out;
  const std::uint64_t s = opt.seed;
  auto input = [&](Shape shape, std::uint64_t tag) {
    return std::vector<Tensor>{Tensor::uniform(std::move(shape), derive_seed(s, tag), -1, 1)};
  };

  {
    ParamStore p;
    const ConvSpec spec = ConvSpec::same(2, 3, {3, 3, 3});
    add_conv_params(p, "conv3d", spec, derive_seed(s, 1));
    out.push_back(detail::check_fragment("conv3d", p, input({2, 5, 4, 6}, 2),
                                         [&](Tape& t, const auto& x) { return t.conv(x[0], spec, 0); }, opt));
  }
  {
    ParamStore p;
    const ConvSpec spec{2, 2, {3, 2, 3}, {2, 1, 2}, {1, 0, 1}};
    add_conv_params(p, "conv3d_strided", spec, derive_seed(s, 3));
    out.push_back(detail::check_fragment("conv3d_strided", p, input({2, 5, 4, 6}, 4),
                                         [&](Tape& t, const auto& x) { return t.conv(x[0], spec, 0); }, opt));
  }
  for (auto strategy : {Conv4dStrategy::Direct, Conv4dStrategy::TemporalDecomposition}) {
    const std::string name = strategy == Conv4dStrategy::Direct ? "conv4d_direct" : "conv4d_temporal_decomposition";
    ParamStore p;
    const ConvSpec spec{2, 2, {3, 3, 1, 3}, {1, 1, 2, 1}, {1, 1, 0, 1}};
    add_conv_params(p, name, spec, derive_seed(s, 5));
    out.push_back(detail::check_fragment(name, p, input({3, 2, 4, 3, 4}, 6),
                                         [&](Tape& t, const auto& x) { return t.conv(x[0], spec, 0); }, opt,
                                         strategy));
  }
  {
    const std::vector<std::size_t> window{1, 2, 1, 3};
    out.push_back(detail::check_fragment("avg_pool3d", {}, input({2, 4, 3, 6}, 7),
                                         [&](Tape& t, const auto& x) { return t.pool(x[0], window); }, opt));
  }
  {
    const std::vector<std::size_t> window{1, 1, 2, 2, 2};
    out.push_back(detail::check_fragment("avg_pool4d", {}, input({3, 2, 4, 4, 2}, 8),
                                         [&](Tape& t, const auto& x) { return t.pool(x[0], window); }, opt));
  }
  {
    ParamStore p;
    p.push_back(he_uniform("dense", {4, 6}, 6, 4, derive_seed(s, 9)));
    p.back().bias = Tensor::uniform({4}, derive_seed(s, 10), -0.5, 0.5);
    out.push_back(detail::check_fragment("dense", p, input({6}, 11),
                                         [](Tape& t, const auto& x) { return t.dense(x[0], 0); }, opt));
  }
  for (auto kind : {Activation::Relu, Activation::Sigmoid, Activation::Tanh}) {
    out.push_back(detail::check_fragment(std::string(to_string(kind)), {}, input({3, 4, 5}, 12),
                                         [kind](Tape& t, const auto& x) { return t.activation(x[0], kind); }, opt));
  }
  out.push_back(detail::check_fragment("global_average_pool", {}, input({3, 2, 3, 4}, 13),
                                       [](Tape& t, const auto& x) { return t.mean(x[0], {1, 2, 3}); }, opt));
  out.push_back(detail::check_fragment("concat", {}, {input({2, 3, 4}, 19)[0], input({1, 3, 4}, 20)[0]},
                                       [](Tape& t, const auto& x) { return t.concat(x, 0); }, opt));
  for (auto dim : {ConvDim::Conv3d, ConvDim::Conv4d}) {
    const std::string name = dim == ConvDim::Conv3d ? "dense_block3d" : "dense_block4d";
    ParamStore p;
    const DenseBlock block = make_dense_block(p, name, dim, 2, 2, 3, 3, 3, derive_seed(s, 14));
    const Shape shape = dim == ConvDim::Conv3d ? Shape{2, 4, 3, 4} : Shape{3, 2, 3, 3, 4};
    out.push_back(detail::check_fragment(name, p, input(shape, 15),
                                         [&](Tape& t, const auto& x) { return dense_block(t, x[0], block); }, opt));
  }
  {
    ParamStore p;
    const GruCell cell = make_gru_cell(p, "gru", 2, 3, 3, derive_seed(s, 16));
    const std::vector<Tensor> xh{input({2, 4, 3, 4}, 17)[0], input({3, 4, 3, 4}, 18)[0]};
    out.push_back(detail::check_fragment("conv_gru_step", p, xh,
                                         [&](Tape& t, const auto& x) { return conv_gru_step(t, x[0], x[1], cell); },
                                         opt));
  }
  return out;
}

/// Full forward pass of each architecture on the tiny config.
inline std::vector<GradcheckCase> architecture_gradchecks(const GradcheckOptions& opt = {}) {
  std::vector<GradcheckCase> out;
  const ModelConfig cfg = tiny_model_config();
  for (ArchId arch : kAllArchs) {
    Model model = build_model(arch, cfg, derive_seed(opt.seed, 0xA0, static_cast<std::uint64_t>(arch)));
    const auto& v = cfg.volume_size;
    const VolumeSequence seq(
        Tensor::uniform({cfg.sequence_length, v[0], v[1], v[2]}, derive_seed(opt.seed, 0xA1), 0.0, 1.0));
    const Tensor projection = loss_projection({9}, derive_seed(opt.seed, 0xA2));
    const FragmentLoss loss = [&](const ParamStore& p, Gradients* grads) {
      Tape tape(p);
      return projected_loss(tape, model.forward(tape, seq), projection, grads);
    };
    out.push_back({std::string(to_string(arch)), gradcheck(model.params, loss, opt)});
  }
  return out;
}

}  // namespace volt4d
