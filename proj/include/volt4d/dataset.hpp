#pragma once

// On-disk dataset layout:
//
//   <dir>/manifest.txt                 key=value manifest with [sections]
//   <dir>/samples/roi<RR>_traj<TTT>.bin one file per sample
//
// Sample file, all integers/floats little-endian:
//
//   offset  size        field
//   0       4           magic "V4DS"
//   4       4   u32     format version (1)
//   8       4   u32     roi_id
//   12      4   u32     trajectory_id
//   16      4   u32     T
//   20      12  u32 x3  D, H, W
//   32      4*T*D*H*W   f32 volumes, row-major (T, D, H, W)
//   ...     72  f64 x9  labels: now(3), plus1(3), plus2(3), mm
//   ...     4   u32     CRC-32 (zlib polynomial) of every preceding byte

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "volt4d/kvconfig.hpp"
#include "volt4d/parallel.hpp"
#include "volt4d/synthgen.hpp"

namespace volt4d {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr char kSampleMagic[4] = {'V', '4', 'D', 'S'};

struct DatasetConfig {
  std::size_t rois = 16;
  std::size_t trajectories_per_roi = 25;
  std::array<std::size_t, 3> volume_size{12, 12, 12};
  std::size_t sequence_length = 5;
  Vec3 fov_mm{3.5, 5.0, 5.0};  // depth, height, width
  std::vector<double> magnitude_classes{0.5, 1.0, 2.0};
  double noise_sigma = 0.02;
  std::size_t val_rois = 2;
  std::size_t test_rois = 2;
  std::uint64_t seed = 1;

  Vec3 voxel_pitch() const {
    return {fov_mm[0] / static_cast<double>(volume_size[0]), fov_mm[1] / static_cast<double>(volume_size[1]),
            fov_mm[2] / static_cast<double>(volume_size[2])};
  }

  double max_magnitude() const { return *std::max_element(magnitude_classes.begin(), magnitude_classes.end()); }

  /// Voxels between the phantom border and the ROI on each side: the largest
  /// possible excursion over the trajectory plus one voxel of slack.
  std::array<std::size_t, 3> margin() const {
    const Vec3 pitch = voxel_pitch();
    const double excursion = static_cast<double>(sequence_length + 1) * max_magnitude();
    std::array<std::size_t, 3> m{};
    for (int a = 0; a < 3; ++a) m[a] = static_cast<std::size_t>(std::ceil(excursion / pitch[a])) + 1;
    return m;
  }

  std::array<std::size_t, 3> phantom_size() const {
    const auto m = margin();
    return {volume_size[0] + 2 * m[0], volume_size[1] + 2 * m[1], volume_size[2] + 2 * m[2]};
  }

  Vec3 roi_origin_mm() const {
    const auto m = margin();
    const Vec3 pitch = voxel_pitch();
    return {static_cast<double>(m[0]) * pitch[0], static_cast<double>(m[1]) * pitch[1],
            static_cast<double>(m[2]) * pitch[2]};
  }

  std::size_t samples() const { return rois * trajectories_per_roi; }

  void validate() const {
    auto bad = [](const std::string& what) { fail(ErrorKind::Config, "invalid dataset config: " + what); };
    if (rois == 0 || trajectories_per_roi == 0) bad("rois and trajectories must be >= 1");
    if (rois > 100 || trajectories_per_roi > 1000) bad("at most 100 ROIs and 1000 trajectories per ROI");
    if (val_rois + test_rois >= rois) bad("val + test ROIs must leave at least one training ROI");
    if (sequence_length == 0) bad("sequence_length must be >= 1");
    if (magnitude_classes.empty()) bad("at least one magnitude class is required");
    for (double m : magnitude_classes)
      if (!(m > 0.0)) bad("magnitude classes must be > 0");
    for (int a = 0; a < 3; ++a)
      if (volume_size[a] == 0 || !(fov_mm[a] > 0.0)) bad("volume size and FOV must be positive");
    if (noise_sigma < 0.0) bad("noise_sigma must be >= 0");
  }

  void write(KeyValues& kv, const std::string& prefix) const {
    kv.set(prefix + "rois", std::to_string(rois));
    kv.set(prefix + "trajectories", std::to_string(trajectories_per_roi));
    kv.set(prefix + "volume_size", join_list(volume_size));
    kv.set(prefix + "sequence_length", std::to_string(sequence_length));
    kv.set(prefix + "fov_mm", join_doubles({fov_mm[0], fov_mm[1], fov_mm[2]}));
    kv.set(prefix + "magnitude_classes_mm", join_doubles(magnitude_classes));
    kv.set(prefix + "noise_sigma", format_double(noise_sigma));
    kv.set(prefix + "val_rois", std::to_string(val_rois));
    kv.set(prefix + "test_rois", std::to_string(test_rois));
    kv.set(prefix + "seed", std::to_string(seed));
  }

  void read(const KeyValues& kv, const std::string& prefix) {
    auto num = [&](const char* k, std::size_t& dst) {
      if (kv.has(prefix + k)) dst = parse_number<std::size_t>(kv.get(prefix + k), k);
    };
    num("rois", rois);
    num("trajectories", trajectories_per_roi);
    if (kv.has(prefix + "volume_size")) {
      const auto v = parse_list<std::size_t>(kv.get(prefix + "volume_size"), "volume_size");
      if (v.size() == 1)
        volume_size = {v[0], v[0], v[0]};
      else if (v.size() == 3)
        volume_size = {v[0], v[1], v[2]};
      else
        fail(ErrorKind::Config, "volume_size needs 1 or 3 entries");
    }
    num("sequence_length", sequence_length);
    if (kv.has(prefix + "fov_mm")) {
      const auto v = parse_list<double>(kv.get(prefix + "fov_mm"), "fov_mm");
      if (v.size() != 3) fail(ErrorKind::Config, "fov_mm needs 3 entries (depth,height,width)");
      fov_mm = {v[0], v[1], v[2]};
    }
    if (kv.has(prefix + "magnitude_classes_mm"))
      magnitude_classes = parse_list<double>(kv.get(prefix + "magnitude_classes_mm"), "magnitude_classes_mm");
    if (kv.has(prefix + "noise_sigma")) noise_sigma = parse_number<double>(kv.get(prefix + "noise_sigma"), "noise_sigma");
    num("val_rois", val_rois);
    num("test_rois", test_rois);
    if (kv.has(prefix + "seed")) seed = parse_number<std::uint64_t>(kv.get(prefix + "seed"), "seed");
  }
};

enum class Split { Train, Val, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(ErrorKind::Config, "unknown split '" + std::string(s) + "'");
}

struct SampleKey {
  std::uint32_t roi_id = 0;
  std::uint32_t trajectory_id = 0;
  friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

inline std::string sample_file_name(SampleKey key) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "roi%02u_traj%03u.bin", key.roi_id, key.trajectory_id);
  return buf;
}

struct DatasetManifest {
  std::uint32_t format_version = kDatasetFormatVersion;
  DatasetConfig config;
  std::vector<std::uint32_t> train_rois, val_rois, test_rois;
  std::map<SampleKey, std::uint32_t> checksums;

  Split split_of(std::uint32_t roi) const {
    auto in = [roi](const auto& v) { return std::find(v.begin(), v.end(), roi) != v.end(); };
    if (in(train_rois)) return Split::Train;
    if (in(val_rois)) return Split::Val;
    if (in(test_rois)) return Split::Test;
    fail(ErrorKind::Corrupt, "ROI " + std::to_string(roi) + " is not assigned to any split");
  }

  const std::vector<std::uint32_t>& rois_of(Split s) const {
    return s == Split::Train ? train_rois : (s == Split::Val ? val_rois : test_rois);
  }

  std::string to_text() const {
    KeyValues kv;
    kv.set("dataset.format_version", std::to_string(format_version));
    config.write(kv, "dataset.");
    kv.set("dataset.samples", std::to_string(config.samples()));
    const Vec3 pitch = config.voxel_pitch();
    kv.set("dataset.voxel_pitch_mm", join_doubles({pitch[0], pitch[1], pitch[2]}));
    kv.set("dataset.phantom_size", join_list(config.phantom_size()));
    kv.set("split.train", join_list(train_rois));
    kv.set("split.val", join_list(val_rois));
    kv.set("split.test", join_list(test_rois));
    for (const auto& [key, crc] : checksums) {
      char hex[16];
      std::snprintf(hex, sizeof hex, "%08x", crc);
      const std::string name = sample_file_name(key);
      kv.set("checksums." + name.substr(0, name.size() - 4), hex);
    }
    return "# volt4d synthetic dataset manifest\n" + kv.to_string();
  }

  static DatasetManifest from_text(std::string_view text, const std::string& origin) {
    const KeyValues kv = KeyValues::parse(text, origin);
    DatasetManifest m;
    m.format_version = parse_number<std::uint32_t>(kv.get("dataset.format_version"), "format_version");
    if (m.format_version != kDatasetFormatVersion)
      fail(ErrorKind::Version, origin + ": dataset format version " + std::to_string(m.format_version) +
                                   ", expected " + std::to_string(kDatasetFormatVersion));
    m.config.read(kv, "dataset.");
    m.train_rois = parse_list<std::uint32_t>(kv.get("split.train"), "split.train");
    m.val_rois = parse_list<std::uint32_t>(kv.get("split.val"), "split.val");
    m.test_rois = parse_list<std::uint32_t>(kv.get("split.test"), "split.test");
    for (const auto& [key, value] : kv.entries()) {
      if (key.rfind("checksums.", 0) != 0) continue;
      unsigned roi = 0, traj = 0;
      if (std::sscanf(key.c_str(), "checksums.roi%u_traj%u", &roi, &traj) != 2)
        fail(ErrorKind::Corrupt, origin + ": malformed checksum key " + key);
      m.checksums[{roi, traj}] = static_cast<std::uint32_t>(std::stoul(value, nullptr, 16));
    }
    return m;
  }
};

/// Seeded shuffle of ROI ids: the first val_rois go to validation, the next
/// test_rois to test, the remainder to training.
inline void assign_splits(DatasetManifest& m) {
  std::vector<std::uint32_t> ids(m.config.rois);
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
  CounterRng rng(derive_seed(m.config.seed, 0x5B117));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  m.val_rois.assign(ids.begin(), ids.begin() + static_cast<long>(m.config.val_rois));
  m.test_rois.assign(ids.begin() + static_cast<long>(m.config.val_rois),
                     ids.begin() + static_cast<long>(m.config.val_rois + m.config.test_rois));
  m.train_rois.assign(ids.begin() + static_cast<long>(m.config.val_rois + m.config.test_rois), ids.end());
  std::sort(m.val_rois.begin(), m.val_rois.end());
  std::sort(m.test_rois.begin(), m.test_rois.end());
  std::sort(m.train_rois.begin(), m.train_rois.end());
}

// ---------------------------------------------------------------------------
// Per-sample generation. Every (roi, trajectory) pair draws from its own
// derived seeds, so samples can be produced in any order.

inline std::uint64_t phantom_seed(const DatasetConfig& cfg, std::uint32_t roi) { return derive_seed(cfg.seed, 12, roi); }

inline Phantom roi_phantom(const DatasetConfig& cfg, std::uint32_t roi) {
  return generate_phantom(phantom_seed(cfg, roi), cfg.phantom_size(), cfg.voxel_pitch(), cfg.phantom_size());
}

inline Trajectory sample_trajectory(const DatasetConfig& cfg, SampleKey key) {
  const std::uint64_t seed = derive_seed(cfg.seed, 10, key.roi_id, key.trajectory_id);
  CounterRng pick(derive_seed(seed, 1));
  const double magnitude = cfg.magnitude_classes[pick.below(cfg.magnitude_classes.size())];
  return generate_trajectory(seed, magnitude, cfg.sequence_length + 2);
}

inline Sample generate_sample(const DatasetConfig& cfg, const Phantom& phantom, SampleKey key) {
  RenderConfig rc;
  rc.volume_size = cfg.volume_size;
  rc.sequence_length = cfg.sequence_length;
  rc.noise_sigma = cfg.noise_sigma;
  rc.noise_seed = derive_seed(cfg.seed, 11, key.roi_id, key.trajectory_id);
  Sample s = render_sequence(phantom, cfg.roi_origin_mm(), sample_trajectory(cfg, key), rc);
  s.roi_id = key.roi_id;
  s.trajectory_id = key.trajectory_id;
  return s;
}

// ---------------------------------------------------------------------------
// Binary sample encoding

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; sample files are far below 4 GiB.
  crc = ::crc32(crc, data, static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<unsigned char> encode_sample(const Sample& s) {
  const Tensor& f = s.sequence.frames();
  std::vector<unsigned char> out;
  out.reserve(36 + 4 * f.size() + 72 + 4);
  out.insert(out.end(), std::begin(kSampleMagic), std::end(kSampleMagic));
  detail::put_u32(out, kDatasetFormatVersion);
  detail::put_u32(out, s.roi_id);
  detail::put_u32(out, s.trajectory_id);
  for (auto d : f.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : f.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (double v : s.labels.flat()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  detail::put_u32(out, detail::crc32_of(out.data(), out.size()));
  return out;
}

inline Sample decode_sample(const std::vector<unsigned char>& bytes, const std::string& origin) {
  constexpr std::size_t header = 32, labels = 72, trailer = 4;
  if (bytes.size() < header + labels + trailer)
    fail(ErrorKind::Checksum, origin + ": file truncated (" + std::to_string(bytes.size()) + " bytes)");
  const std::uint32_t stored = detail::get_u32(bytes.data() + bytes.size() - trailer);
  if (detail::crc32_of(bytes.data(), bytes.size() - trailer) != stored)
    fail(ErrorKind::Checksum, origin + ": CRC-32 mismatch (truncated or corrupted file)");
  if (!std::equal(std::begin(kSampleMagic), std::end(kSampleMagic), bytes.begin()))
    fail(ErrorKind::Corrupt, origin + ": bad magic");
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kDatasetFormatVersion)
    fail(ErrorKind::Version, origin + ": sample format version " + std::to_string(version));
  Sample s;
  s.roi_id = detail::get_u32(bytes.data() + 8);
  s.trajectory_id = detail::get_u32(bytes.data() + 12);
  Shape shape;
  for (int i = 0; i < 4; ++i) shape.push_back(detail::get_u32(bytes.data() + 16 + 4 * i));
  const std::size_t n = shape_numel(shape);
  if (bytes.size() != header + 4 * n + labels + trailer)
    fail(ErrorKind::Corrupt, origin + ": payload size does not match header shape " + shape_string(shape));
  Tensor frames(shape);
  const unsigned char* p = bytes.data() + header;
  for (std::size_t i = 0; i < n; ++i, p += 4) frames[i] = std::bit_cast<float>(detail::get_u32(p));
  std::array<double, 9> flat{};
  for (auto& v : flat) {
    v = std::bit_cast<double>(detail::get_u64(p));
    p += 8;
  }
  s.sequence = VolumeSequence(std::move(frames));
  s.labels = motion_from_flat<MotionLabels>(flat);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset directory

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f), {});
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot create " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!f) fail(ErrorKind::Io, "write failed for " + path.string());
}

/// Generates every sample, writes one file per sample and finally the
/// manifest. Work is split by ROI across `threads` workers.
inline DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir,
                                     std::size_t threads = 1) {
  cfg.validate();
  DatasetManifest manifest;
  manifest.config = cfg;
  assign_splits(manifest);
  std::error_code ec;
  std::filesystem::create_directories(dir / "samples", ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + (dir / "samples").string() + ": " + ec.message());

  std::vector<std::vector<std::uint32_t>> crcs(cfg.rois, std::vector<std::uint32_t>(cfg.trajectories_per_roi));
  parallel_for(cfg.rois, threads, [&](std::size_t roi) {
    const Phantom phantom = roi_phantom(cfg, static_cast<std::uint32_t>(roi));
    for (std::size_t t = 0; t < cfg.trajectories_per_roi; ++t) {
      const SampleKey key{static_cast<std::uint32_t>(roi), static_cast<std::uint32_t>(t)};
      const auto bytes = encode_sample(generate_sample(cfg, phantom, key));
      write_file(dir / "samples" / sample_file_name(key), bytes.data(), bytes.size());
      crcs[roi][t] = detail::get_u32(bytes.data() + bytes.size() - 4);
    }
  });
  for (std::uint32_t r = 0; r < cfg.rois; ++r)
    for (std::uint32_t t = 0; t < cfg.trajectories_per_roi; ++t) manifest.checksums[{r, t}] = crcs[r][t];
  const std::string text = manifest.to_text();
  write_file(dir / "manifest.txt", text.data(), text.size());
  return manifest;
}

/// Read access to a dataset directory. Samples are decoded on demand and
/// validated against both their own trailer and the manifest checksum.
class DatasetReader {
 public:
  explicit DatasetReader(std::filesystem::path dir) : dir_(std::move(dir)) {
    const auto bytes = read_file(dir_ / "manifest.txt");
    manifest_ = DatasetManifest::from_text(std::string(bytes.begin(), bytes.end()), (dir_ / "manifest.txt").string());
    for (const auto& [key, crc] : manifest_.checksums) keys_.push_back(key);
    if (keys_.size() != manifest_.config.samples())
      fail(ErrorKind::Corrupt, "manifest lists " + std::to_string(keys_.size()) + " samples, expected " +
                                   std::to_string(manifest_.config.samples()));
  }

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return keys_.size(); }
  const std::vector<SampleKey>& keys() const noexcept { return keys_; }

  Sample load(SampleKey key) const {
    const auto path = dir_ / "samples" / sample_file_name(key);
    if (!std::filesystem::exists(path)) fail(ErrorKind::Io, "missing sample file " + path.string());
    const auto bytes = read_file(path);
    Sample s = decode_sample(bytes, path.string());
    const auto it = manifest_.checksums.find(key);
    if (it == manifest_.checksums.end() || detail::get_u32(bytes.data() + bytes.size() - 4) != it->second)
      fail(ErrorKind::Checksum, path.string() + ": checksum differs from manifest");
    if (s.roi_id != key.roi_id || s.trajectory_id != key.trajectory_id)
      fail(ErrorKind::Corrupt, path.string() + ": header ids do not match file name");
    return s;
  }

  std::vector<SampleKey> keys_of(Split split) const {
    std::vector<SampleKey> out;
    for (const auto& k : keys_)
      if (manifest_.split_of(k.roi_id) == split) out.push_back(k);
    return out;
  }

  std::vector<Sample> load_split(Split split) const {
    std::vector<Sample> out;
    for (const auto& k : keys_of(split)) out.push_back(load(k));
    return out;
  }

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
  std::vector<SampleKey> keys_;
};

inline DatasetReader read_dataset(const std::filesystem::path& dir) { return DatasetReader(dir); }

}  // namespace volt4d
