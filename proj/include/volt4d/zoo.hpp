#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volt4d/blocks.hpp"
#include "volt4d/kvconfig.hpp"
#include "volt4d/motion.hpp"
#include "volt4d/params.hpp"
#include "volt4d/tape.hpp"

namespace volt4d {

enum class ArchId { TwoPathCnn3d, NPathCnn3d, Cnn4d, NPathCnn4d, GruCnn3d };

/// Row order of the comparison table.
inline constexpr std::array<ArchId, 5> kAllArchs{ArchId::TwoPathCnn3d, ArchId::NPathCnn3d, ArchId::Cnn4d,
                                                 ArchId::NPathCnn4d, ArchId::GruCnn3d};

inline std::string_view to_string(ArchId a) {
  switch (a) {
    case ArchId::TwoPathCnn3d: return "TwoPathCnn3d";
    case ArchId::NPathCnn3d: return "NPathCnn3d";
    case ArchId::Cnn4d: return "Cnn4d";
    case ArchId::NPathCnn4d: return "NPathCnn4d";
    case ArchId::GruCnn3d: return "GruCnn3d";
  }
  return "?";
}

/// Display name used in reports.
inline std::string_view display_name(ArchId a) {
  switch (a) {
    case ArchId::TwoPathCnn3d: return "2-Path-CNN3D";
    case ArchId::NPathCnn3d: return "n-Path-CNN3D";
    case ArchId::Cnn4d: return "CNN4D";
    case ArchId::NPathCnn4d: return "n-Path-CNN4D";
    case ArchId::GruCnn3d: return "GRU-CNN3D";
  }
  return "?";
}

/// Accepts identifiers and display names, case-insensitively, ignoring dashes.
inline ArchId parse_arch(std::string_view text) {
  auto normalize = [](std::string_view s) {
    std::string out;
    for (char c : s)
      if (c != '-' && c != '_') out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const std::string key = normalize(text);
  for (auto a : kAllArchs)
    if (key == normalize(to_string(a)) || key == normalize(display_name(a))) return a;
  fail(ErrorKind::Config, "unknown architecture '" + std::string(text) + "'");
}

struct ModelConfig {
  std::size_t sequence_length = 5;
  std::array<std::size_t, 3> volume_size{12, 12, 12};
  std::vector<std::size_t> path_channels{8, 16};
  std::vector<std::size_t> cnn4d_channels{8, 8, 16};
  std::size_t gru_channels = 8;
  std::size_t growth_rate = 8;
  std::size_t blocks = 3;
  std::size_t layers_per_block = 3;
  std::size_t kernel = 3;
  std::size_t temporal_kernel = 3;
  std::size_t head_outputs = 9;
  bool standardize_frames = true;  // zero mean, unit variance per input volume

  void validate() const {
    auto bad = [](const std::string& what) { fail(ErrorKind::Config, "invalid model config: " + what); };
    if (head_outputs != 9) bad("head_outputs must be 9 (three 3-vectors)");
    if (sequence_length == 0) bad("sequence_length must be >= 1");
    for (auto v : volume_size)
      if (v == 0) bad("volume_size entries must be >= 1");
    if (path_channels.empty()) bad("path_channels must list at least one width");
    if (cnn4d_channels.empty()) bad("cnn4d_channels must list at least one width");
    for (auto v : path_channels)
      if (v == 0) bad("path_channels entries must be >= 1");
    for (auto v : cnn4d_channels)
      if (v == 0) bad("cnn4d_channels entries must be >= 1");
    if (gru_channels == 0) bad("gru_channels must be >= 1");
    if (growth_rate == 0) bad("growth_rate must be >= 1");
    if (blocks == 0) bad("blocks must be >= 1");
    if (layers_per_block == 0) bad("layers_per_block must be >= 1");
    if (kernel % 2 == 0) bad("kernel must be odd for same padding");
    if (temporal_kernel % 2 == 0) bad("temporal_kernel must be odd for same padding");
  }

  void write(KeyValues& kv, const std::string& prefix) const {
    kv.set(prefix + "sequence_length", std::to_string(sequence_length));
    kv.set(prefix + "volume_size", join_list(volume_size));
    kv.set(prefix + "path_channels", join_list(path_channels));
    kv.set(prefix + "cnn4d_channels", join_list(cnn4d_channels));
    kv.set(prefix + "gru_channels", std::to_string(gru_channels));
    kv.set(prefix + "growth_rate", std::to_string(growth_rate));
    kv.set(prefix + "blocks", std::to_string(blocks));
    kv.set(prefix + "layers_per_block", std::to_string(layers_per_block));
    kv.set(prefix + "kernel", std::to_string(kernel));
    kv.set(prefix + "temporal_kernel", std::to_string(temporal_kernel));
    kv.set(prefix + "head_outputs", std::to_string(head_outputs));
    kv.set(prefix + "standardize_frames", standardize_frames ? "1" : "0");
  }

  /// Reads every key present under `prefix`; absent keys keep their current value.
  void read(const KeyValues& kv, const std::string& prefix) {
    auto num = [&](const char* k, std::size_t& dst) {
      if (kv.has(prefix + k)) dst = parse_number<std::size_t>(kv.get(prefix + k), k);
    };
    auto list = [&](const char* k, std::vector<std::size_t>& dst) {
      if (kv.has(prefix + k)) dst = parse_list<std::size_t>(kv.get(prefix + k), k);
    };
    num("sequence_length", sequence_length);
    if (kv.has(prefix + "volume_size")) {
      const auto v = parse_list<std::size_t>(kv.get(prefix + "volume_size"), "volume_size");
      if (v.size() == 1)
        volume_size = {v[0], v[0], v[0]};
      else if (v.size() == 3)
        volume_size = {v[0], v[1], v[2]};
      else
        fail(ErrorKind::Config, "volume_size needs 1 or 3 entries");
    }
    list("path_channels", path_channels);
    list("cnn4d_channels", cnn4d_channels);
    num("gru_channels", gru_channels);
    num("growth_rate", growth_rate);
    num("blocks", blocks);
    num("layers_per_block", layers_per_block);
    num("kernel", kernel);
    num("temporal_kernel", temporal_kernel);
    num("head_outputs", head_outputs);
    if (kv.has(prefix + "standardize_frames")) {
      const std::string v = kv.get(prefix + "standardize_frames");
      if (v != "0" && v != "1") fail(ErrorKind::Config, "standardize_frames must be 0 or 1, got '" + v + "'");
      standardize_frames = v == "1";
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Window 2 on even axes, 1 otherwise: pooling never needs padding.
inline std::size_t halving_window(std::size_t extent) { return extent % 2 == 0 ? 2 : 1; }

/// conv -> relu -> optional average pool.
struct ConvStage {
  ConvSpec spec;
  std::size_t param = 0;
  std::vector<std::size_t> pool;  // empty: no pooling

  Var apply(Tape& tape, Var x) const {
    Var y = tape.relu(tape.conv(x, spec, param));
    return pool.empty() ? y : tape.pool(y, pool);
  }
};

/// One of the five motion networks: parameters plus the static layer graph.
class Model {
 public:
  ArchId arch = ArchId::NPathCnn4d;
  ModelConfig config;
  std::uint64_t seed = 0;
  ParamStore params;

  std::vector<ConvStage> stem;  // shared 3D path stage, or the leading 4D convs of Cnn4d
  std::optional<GruCell> gru;
  ConvDim backbone_dim = ConvDim::Conv3d;
  std::vector<DenseBlock> blocks;
  std::vector<std::vector<std::size_t>> transitions;  // pool windows between blocks (empty: none)
  std::size_t head = 0;

  /// Indices of the input volumes this architecture reads.
  std::vector<std::size_t> consumed_frames() const {
    std::vector<std::size_t> frames;
    if (arch == ArchId::TwoPathCnn3d) {
      frames = {0, config.sequence_length - 1};
      if (config.sequence_length == 1) frames.pop_back();
    } else {
      for (std::size_t t = 0; t < config.sequence_length; ++t) frames.push_back(t);
    }
    return frames;
  }

  /// The shared path applied to a single (1, D, H, W) volume.
  Var path(Tape& tape, Var volume) const {
    for (const auto& stage : stem) volume = stage.apply(tape, volume);
    return volume;
  }

  /// Dense blocks, transitions, relu, global average pooling and regression head.
  Var backbone(Tape& tape, Var features) const {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      features = dense_block(tape, features, blocks[b]);
      if (b + 1 < blocks.size() && !transitions[b].empty()) features = tape.pool(features, transitions[b]);
    }
    features = tape.relu(features);
    const AxisLayout layout = backbone_dim == ConvDim::Conv3d ? AxisLayout::volume() : AxisLayout::sequence();
    return tape.dense(tape.mean(features, layout.non_channel_axes()), head);
  }

  void check_input(const VolumeSequence& seq) const {
    const Shape expected{config.volume_size[0], config.volume_size[1], config.volume_size[2]};
    if (seq.length() != config.sequence_length || seq.volume_shape() != expected)
      fail(ErrorKind::ShapeMismatch,
           std::string(to_string(arch)) + " expects " + std::to_string(config.sequence_length) + " volumes of " +
               shape_string(expected) + ", got " + std::to_string(seq.length()) + " volumes of " +
               shape_string(seq.volume_shape()));
  }

  /// The network input: frames rescaled to zero mean and unit variance each
  /// when the config asks for it.
  VolumeSequence prepare(const VolumeSequence& seq) const {
    if (!config.standardize_frames) return seq;
    Tensor frames = seq.frames();
    const std::size_t n = frames.size() / seq.length();
    for (std::size_t t = 0; t < seq.length(); ++t) {
      double* f = frames.ptr() + t * n;
      double mean = 0.0, var = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += f[i];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) var += (f[i] - mean) * (f[i] - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
      for (std::size_t i = 0; i < n; ++i) f[i] = (f[i] - mean) * scale;
    }
    return VolumeSequence(std::move(frames));
  }

  /// Records the full forward pass; returns the 9-element head output.
  Var forward(Tape& tape, const VolumeSequence& raw) const {
    check_input(raw);
    const VolumeSequence seq = prepare(raw);
    const Shape vol = seq.volume_shape();
    const Shape one_channel{1, vol[0], vol[1], vol[2]};
    auto frame_input = [&](std::size_t t) { return tape.input(seq.frame(t).reshaped(one_channel)); };

    Var features;
    switch (arch) {
      case ArchId::TwoPathCnn3d:
      case ArchId::NPathCnn3d: {
        std::vector<Var> paths;
        for (auto t : consumed_frames()) paths.push_back(path(tape, frame_input(t)));
        features = tape.concat(paths, AxisLayout::volume().index_of(Axis::Channel));
        break;
      }
      case ArchId::NPathCnn4d: {
        std::vector<Var> steps;
        for (auto t : consumed_frames()) {
          const Var p = path(tape, frame_input(t));
          Shape s = tape.value(p).shape();
          s.insert(s.begin(), 1);
          steps.push_back(tape.reshape(p, s));
        }
        features = tape.concat(steps, AxisLayout::sequence().index_of(Axis::Time));
        break;
      }
      case ArchId::Cnn4d: {
        features = tape.input(seq.frames().reshaped({seq.length(), 1, vol[0], vol[1], vol[2]}));
        for (const auto& stage : stem) features = stage.apply(tape, features);
        break;
      }
      case ArchId::GruCnn3d: {
        Var h = tape.input(Tensor::zeros({gru->hidden_channels(), vol[0], vol[1], vol[2]}));
        for (auto t : consumed_frames()) h = conv_gru_step(tape, frame_input(t), h, *gru);
        features = h;
        break;
      }
    }
    return backbone(tape, features);
  }

  MotionPrediction predict(const VolumeSequence& seq) const {
    Tape tape(params);
    const Var out = forward(tape, seq);
    return motion_from_flat<MotionPrediction>(tape.value(out).data());
  }
};

namespace detail {

inline std::vector<std::size_t> spatial_pool(ConvDim dim, std::array<std::size_t, 3>& extent) {
  std::array<std::size_t, 3> w{};
  bool any = false;
  for (int a = 0; a < 3; ++a) {
    w[a] = halving_window(extent[a]);
    any = any || w[a] > 1;
    extent[a] /= w[a];
  }
  if (!any) return {};
  if (dim == ConvDim::Conv3d) return {1, w[0], w[1], w[2]};
  return {1, 1, w[0], w[1], w[2]};
}

}  // namespace detail

inline Model build_model(ArchId arch, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.arch = arch;
  m.config = cfg;
  m.seed = seed;
  std::array<std::size_t, 3> extent = cfg.volume_size;
  std::size_t channels = 0;

  auto add_stage = [&](ConvDim dim, std::size_t cin, std::size_t cout, std::size_t index, bool pooled) {
    ConvStage stage;
    stage.spec = same_conv(dim, cin, cout, cfg.kernel, cfg.temporal_kernel);
    const std::string name = (dim == ConvDim::Conv3d ? "path.conv" : "stem.conv4d") + std::to_string(index);
    stage.param = add_conv_params(m.params, name, stage.spec, derive_seed(seed, 1, index));
    if (pooled) stage.pool = detail::spatial_pool(dim, extent);
    m.stem.push_back(std::move(stage));
  };

  switch (arch) {
    case ArchId::TwoPathCnn3d:
    case ArchId::NPathCnn3d:
    case ArchId::NPathCnn4d: {
      std::size_t cin = 1;
      for (std::size_t i = 0; i < cfg.path_channels.size(); ++i) {
        add_stage(ConvDim::Conv3d, cin, cfg.path_channels[i], i, true);
        cin = cfg.path_channels[i];
      }
      const std::size_t paths = m.consumed_frames().size();
      if (arch == ArchId::NPathCnn4d) {
        m.backbone_dim = ConvDim::Conv4d;
        channels = cin;
      } else {
        channels = cin * paths;
      }
      break;
    }
    case ArchId::Cnn4d: {
      // Spatial pooling after the first and last leading conv mirrors the
      // two-stage downsampling of the path stage.
      std::size_t cin = 1;
      const std::size_t n = cfg.cnn4d_channels.size();
      const std::size_t pools = std::min(cfg.path_channels.size(), n);
      for (std::size_t i = 0; i < n; ++i) {
        const bool pooled = i == 0 ? pools >= 1 : i + pools > n;
        add_stage(ConvDim::Conv4d, cin, cfg.cnn4d_channels[i], i, pooled);
        cin = cfg.cnn4d_channels[i];
      }
      m.backbone_dim = ConvDim::Conv4d;
      channels = cin;
      break;
    }
    case ArchId::GruCnn3d: {
      m.gru = make_gru_cell(m.params, "gru", 1, cfg.gru_channels, cfg.kernel, derive_seed(seed, 2));
      channels = cfg.gru_channels;
      break;
    }
  }

  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    DenseBlock block = make_dense_block(m.params, "block" + std::to_string(b), m.backbone_dim, channels,
                                        cfg.growth_rate, cfg.layers_per_block, cfg.kernel, cfg.temporal_kernel,
                                        derive_seed(seed, 3, b));
    channels = block.out_channels();
    m.blocks.push_back(std::move(block));
    if (b + 1 < cfg.blocks) m.transitions.push_back(detail::spatial_pool(m.backbone_dim, extent));
  }

  m.params.push_back(he_uniform("head", {cfg.head_outputs, channels}, channels, cfg.head_outputs, derive_seed(seed, 4)));
  m.head = m.params.size() - 1;
  return m;
}

inline std::size_t count_parameters(const Model& m) {
  std::size_t n = 0;
  for (const auto& p : m.params) n += p.count();
  return n;
}

inline MotionPrediction model_forward(const Model& model, const VolumeSequence& seq) { return model.predict(seq); }

}  // namespace volt4d
