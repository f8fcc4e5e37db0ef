#pragma once

// Checkpoint file: a key=value text manifest terminated by the line
// "end_header", followed by the raw little-endian f64 buffers of every
// parameter tensor in manifest order (weight then bias per layer).

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>

#include "volt4d/dataset.hpp"
#include "volt4d/kvconfig.hpp"
#include "volt4d/zoo.hpp"

namespace volt4d {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr std::string_view kCheckpointHeaderEnd = "end_header\n";

struct Checkpoint {
  Model model;
  std::size_t step_count = 0;
};

namespace detail {

inline std::string conv_spec_text(const ConvSpec& s) {
  return "in=" + std::to_string(s.in_channels) + ";out=" + std::to_string(s.out_channels) +
         ";kernel=" + join_list(s.kernel) + ";stride=" + join_list(s.stride) + ";padding=" + join_list(s.padding);
}

}  // namespace detail

inline std::string checkpoint_header(const Model& model, std::size_t step_count) {
  KeyValues kv;
  kv.set("format", "volt4d-checkpoint");
  kv.set("format_version", std::to_string(kCheckpointFormatVersion));
  kv.set("arch", std::string(to_string(model.arch)));
  kv.set("seed", std::to_string(model.seed));
  kv.set("step_count", std::to_string(step_count));
  model.config.write(kv, "model.");
  for (std::size_t i = 0; i < model.stem.size(); ++i)
    kv.set("layers." + model.params[model.stem[i].param].name, detail::conv_spec_text(model.stem[i].spec));
  if (model.gru) {
    kv.set("layers.gru.input", detail::conv_spec_text(model.gru->input_spec));
    kv.set("layers.gru.hidden", detail::conv_spec_text(model.gru->hidden_spec));
  }
  for (const auto& block : model.blocks)
    for (std::size_t i = 0; i < block.specs.size(); ++i)
      kv.set("layers." + model.params[block.params[i]].name, detail::conv_spec_text(block.specs[i]));
  kv.set("tensors.count", std::to_string(2 * model.params.size()));
  std::size_t k = 0;
  for (const auto& p : model.params) {
    kv.set("tensors." + std::to_string(k++), p.name + ".weight " + join_list(p.weight.shape()));
    kv.set("tensors." + std::to_string(k++), p.name + ".bias " + join_list(p.bias.shape()));
  }
  return kv.to_string() + std::string(kCheckpointHeaderEnd);
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model, std::size_t step_count = 0) {
  std::string header = checkpoint_header(model, step_count);
  std::vector<unsigned char> bytes(header.begin(), header.end());
  for (const auto& p : model.params)
    for (const Tensor* t : {&p.weight, &p.bias})
      for (double v : t->data()) detail::put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file(path, bytes.data(), bytes.size());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto end = all.find(kCheckpointHeaderEnd);
  if (end == std::string_view::npos) fail(ErrorKind::Corrupt, path.string() + ": missing checkpoint header");
  const KeyValues kv = KeyValues::parse(all.substr(0, end), path.string());
  if (kv.get_or("format", "") != "volt4d-checkpoint") fail(ErrorKind::Corrupt, path.string() + ": not a checkpoint");
  const auto version = parse_number<std::uint32_t>(kv.get("format_version"), "format_version");
  if (version != kCheckpointFormatVersion)
    fail(ErrorKind::Version, path.string() + ": checkpoint version " + std::to_string(version));

  ModelConfig cfg;
  cfg.read(kv, "model.");
  Checkpoint ck;
  ck.model = build_model(parse_arch(kv.get("arch")), cfg, parse_number<std::uint64_t>(kv.get("seed"), "seed"));
  ck.step_count = parse_number<std::size_t>(kv.get("step_count"), "step_count");

  const std::size_t expected_tensors = 2 * ck.model.params.size();
  if (parse_number<std::size_t>(kv.get("tensors.count"), "tensors.count") != expected_tensors)
    fail(ErrorKind::Corrupt, path.string() + ": tensor count does not match architecture");
  std::size_t k = 0, offset = end + kCheckpointHeaderEnd.size();
  for (auto& p : ck.model.params) {
    for (Tensor* t : {&p.weight, &p.bias}) {
      const std::string line = kv.get("tensors." + std::to_string(k++));
      const auto space = line.find(' ');
      const Shape shape = parse_list<std::size_t>(line.substr(space + 1), "tensor shape");
      if (space == std::string::npos || shape != t->shape())
        fail(ErrorKind::Corrupt, path.string() + ": tensor '" + line + "' does not match architecture");
      if (offset + 8 * t->size() > bytes.size()) fail(ErrorKind::Corrupt, path.string() + ": truncated payload");
      for (auto& v : t->data()) {
        v = std::bit_cast<double>(detail::get_u64(bytes.data() + offset));
        offset += 8;
      }
    }
  }
  if (offset != bytes.size()) fail(ErrorKind::Corrupt, path.string() + ": trailing bytes after payload");
  return ck;
}

}  // namespace volt4d
