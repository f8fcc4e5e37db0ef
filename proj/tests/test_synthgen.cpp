#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace volt4d;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DatasetConfig small_dataset() {
  DatasetConfig c;
  c.rois = 5;
  c.trajectories_per_roi = 4;
  c.volume_size = {6, 6, 6};
  c.val_rois = 1;
  c.test_rois = 1;
  c.seed = 21;
  return c;
}

Trajectory scripted(std::vector<Vec3> samples) {
  Trajectory t;
  t.samples = std::move(samples);
  t.magnitude_class = 1.0;
  return t;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::State;
}

}  // namespace

TEST(Phantom, DeterministicAndNormalised) {
  const Vec3 pitch{0.3, 0.4, 0.4};
  const Phantom a = generate_phantom(5, {10, 12, 14}, pitch), b = generate_phantom(5, {10, 12, 14}, pitch);
  EXPECT_EQ(a.volume, b.volume);
  double lo = 1.0, hi = 0.0;
  for (double v : a.volume.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
}

TEST(Phantom, DifferentSeedsDiffer) {
  const Phantom a = generate_phantom(1, {10, 10, 10}, {0.4, 0.4, 0.4});
  const Phantom b = generate_phantom(2, {10, 10, 10}, {0.4, 0.4, 0.4});
  double sum = 0.0;
  for (std::size_t i = 0; i < a.volume.size(); ++i) sum += std::abs(a.volume[i] - b.volume[i]);
  EXPECT_GT(sum / double(a.volume.size()), 0.05);
}

TEST(Phantom, TooSmallIsConfigError) {
  EXPECT_EQ(kind_of([] { generate_phantom(1, {4, 4, 4}, {1, 1, 1}, {5, 4, 4}); }), ErrorKind::Config);
}

TEST(Spline, InterpolatesInteriorKnots) {
  const std::vector<Vec3> cps{{0, 0, 0}, {1, 0, 0}, {2, 1, 0}, {3, 1, 2}, {4, 0, 0}};
  EXPECT_EQ(spline_eval(cps, 0.0), cps[1]);
  EXPECT_EQ(spline_eval(cps, 1.0), cps[3]);
  const Vec3 mid = spline_eval(cps, 0.5);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(mid[a], cps[2][a], 1e-12);
}

TEST(Spline, CollinearEvenlySpacedIsLinear) {
  std::vector<Vec3> cps;
  for (int i = 0; i < 6; ++i) cps.push_back({0.5 * i, -1.0 * i, 2.0 * i});
  for (double u : {0.1, 0.37, 0.8}) {
    const Vec3 p = spline_eval(cps, u);
    const double s = 1.0 + 3.0 * u;
    EXPECT_NEAR(p[0], 0.5 * s, 1e-12);
    EXPECT_NEAR(p[1], -1.0 * s, 1e-12);
    EXPECT_NEAR(p[2], 2.0 * s, 1e-12);
  }
}

TEST(Trajectory, InvariantsOver100Seeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    for (double m : {0.5, 1.0, 2.0}) {
      const Trajectory t = generate_trajectory(seed, m);
      ASSERT_EQ(t.samples.size(), 7u);
      EXPECT_EQ(t.samples[0], (Vec3{0, 0, 0}));
      EXPECT_LE(t.max_step(), m);
      EXPECT_GE(t.path_length(6), 0.5 * m);
      for (std::size_t i = 1; i < 7; ++i) EXPECT_LE(norm(t.samples[i] - t.samples[i - 1]), m);
    }
}

TEST(Trajectory, ShrinkingMagnitudeShrinksLabels) {
  const double big = norm(labels_from_trajectory(generate_trajectory(3, 1.0), 5).plus2);
  const double small = norm(labels_from_trajectory(generate_trajectory(3, 1e-9), 5).plus2);
  EXPECT_LT(small, 1e-8 * std::max(big, 1.0));
  EXPECT_EQ(kind_of([] { generate_trajectory(1, 0.0); }), ErrorKind::Config);
}

TEST(Render, StaticSceneGivesIdenticalFramesAndZeroLabels) {
  const Phantom ph = generate_phantom(3, {16, 16, 16}, {0.25, 0.25, 0.25});
  RenderConfig rc;
  rc.volume_size = {6, 6, 6};
  rc.noise_sigma = 0.0;
  const Sample s = render_sequence(ph, {1.0, 1.0, 1.0}, scripted(std::vector<Vec3>(7, Vec3{0, 0, 0})), rc);
  for (std::size_t t = 1; t < 5; ++t) EXPECT_EQ(s.sequence.frame(t), s.sequence.frame(0));
  for (double v : s.labels.flat()) EXPECT_EQ(v, 0.0);
}

TEST(Render, IntegerVoxelShiftMovesContent) {
  const Phantom ph = generate_phantom(4, {20, 20, 20}, {0.5, 0.5, 0.5});
  RenderConfig rc;
  rc.volume_size = {6, 6, 6};
  rc.noise_sigma = 0.0;
  std::vector<Vec3> samples(7, Vec3{0, 0, 0});
  samples[4] = {0.5, 1.0, -1.5};
  const Sample s = render_sequence(ph, {3.0, 3.0, 3.0}, scripted(samples), rc);
  const Tensor f0 = s.sequence.frame(0), f4 = s.sequence.frame(4);
  for (std::size_t d = 0; d < 5; ++d)
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t w = 3; w < 6; ++w) EXPECT_EQ(f4.at({d, h, w}), f0.at({d + 1, h + 2, w - 3}));
  EXPECT_EQ(s.labels.now, (Vec3{0.5, 1.0, -1.5}));
}

TEST(Render, MatchesTrilinearOracle) {
  const Phantom ph = generate_phantom(6, {16, 16, 16}, {0.3, 0.4, 0.5});
  RenderConfig rc;
  rc.volume_size = {4, 5, 3};
  rc.noise_sigma = 0.0;
  const Trajectory traj = generate_trajectory(9, 0.5);
  const Vec3 origin{1.5, 2.0, 2.5};
  const Sample s = render_sequence(ph, origin, traj, rc);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t d = 0; d < 4; ++d)
      for (std::size_t h = 0; h < 5; ++h)
        for (std::size_t w = 0; w < 3; ++w) {
          const double ref = oracle::trilinear(ph.volume, (origin[0] + traj.samples[t][0]) / 0.3 + double(d),
                                               (origin[1] + traj.samples[t][1]) / 0.4 + double(h),
                                               (origin[2] + traj.samples[t][2]) / 0.5 + double(w));
          EXPECT_NEAR(s.sequence.frames().at({t, d, h, w}), ref, 1e-6);
        }
}

TEST(Render, ScriptedLabelsAreExact) {
  std::vector<Vec3> samples;
  for (int i = 0; i < 7; ++i) samples.push_back({0.1 * i, -0.05 * i * i, 0.3});
  samples[0] = {0, 0, 0};
  const MotionLabels l = labels_from_trajectory(scripted(samples), 5);
  EXPECT_EQ(l.now, samples[4]);
  EXPECT_EQ(l.plus1, samples[5]);
  EXPECT_EQ(l.plus2, samples[6]);
}

TEST(Render, LeavingThePhantomNamesTheTimestep) {
  const Phantom ph = generate_phantom(3, {10, 10, 10}, {0.5, 0.5, 0.5});
  RenderConfig rc;
  rc.volume_size = {6, 6, 6};
  std::vector<Vec3> samples(7, Vec3{0, 0, 0});
  samples[3] = {0, 5.0, 0};
  try {
    render_sequence(ph, {0.5, 0.5, 0.5}, scripted(samples), rc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfBounds);
    EXPECT_NE(std::string(e.what()).find("timestep 3"), std::string::npos);
  }
}

TEST(Render, IgnoresPhantomOutsideTheSweptRegion) {
  const DatasetConfig cfg = small_dataset();
  Phantom ph = roi_phantom(cfg, 0);
  DatasetConfig quiet = cfg;
  quiet.noise_sigma = 0.0;
  const SampleKey key{0, 1};
  const Sample before = generate_sample(quiet, ph, key);
  const Trajectory traj = sample_trajectory(cfg, key);
  const Vec3 origin = cfg.roi_origin_mm(), pitch = cfg.voxel_pitch();
  std::array<double, 3> lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
  for (std::size_t t = 0; t < cfg.sequence_length; ++t)
    for (int a = 0; a < 3; ++a) {
      const double anchor = (origin[a] + traj.samples[t][a]) / pitch[a];
      lo[a] = std::min(lo[a], std::floor(anchor));
      hi[a] = std::max(hi[a], std::ceil(anchor + double(cfg.volume_size[a] - 1)));
    }
  const auto& v = ph.volume;
  for (std::size_t d = 0; d < v.dim(0); ++d)
    for (std::size_t h = 0; h < v.dim(1); ++h)
      for (std::size_t w = 0; w < v.dim(2); ++w) {
        const bool inside = double(d) >= lo[0] && double(d) <= hi[0] && double(h) >= lo[1] && double(h) <= hi[1] &&
                            double(w) >= lo[2] && double(w) <= hi[2];
        if (!inside) ph.volume.at({d, h, w}) = 0.5;
      }
  EXPECT_EQ(generate_sample(quiet, ph, key).sequence.frames(), before.sequence.frames());
}

TEST(Dataset, ConfigDefaultsAndValidation) {
  const DatasetConfig c;
  EXPECT_EQ(c.samples(), 400u);
  EXPECT_EQ(c.rois - c.val_rois - c.test_rois, 12u);
  DatasetConfig bad = c;
  bad.val_rois = 8;
  bad.test_rois = 8;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::Config);
  bad = c;
  bad.magnitude_classes = {1.0, -1.0};
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::Config);
}

TEST(Dataset, WritesCountsAndRoundTrips) {
  TempDir dir("volt4d_ds_roundtrip");
  const DatasetConfig cfg = small_dataset();
  const DatasetManifest m = build_dataset(cfg, dir.path, 2);
  const DatasetReader reader(dir.path);
  EXPECT_EQ(reader.size(), 20u);
  EXPECT_EQ(reader.manifest().train_rois.size(), 3u);
  EXPECT_EQ(reader.manifest().val_rois, m.val_rois);
  EXPECT_EQ(reader.manifest().test_rois, m.test_rois);
  EXPECT_EQ(reader.manifest().config.seed, cfg.seed);
  std::size_t total = 0;
  for (Split s : {Split::Train, Split::Val, Split::Test}) total += reader.load_split(s).size();
  EXPECT_EQ(total, 20u);

  const Phantom ph = roi_phantom(cfg, 2);
  const Sample fresh = generate_sample(cfg, ph, {2, 3});
  const Sample loaded = reader.load({2, 3});
  EXPECT_EQ(loaded.sequence.frames(), fresh.sequence.frames());
  EXPECT_EQ(loaded.labels.flat(), fresh.labels.flat());
  EXPECT_EQ(loaded.roi_id, 2u);
  EXPECT_EQ(loaded.trajectory_id, 3u);
}

TEST(Dataset, SameSeedIsByteIdentical) {
  TempDir a("volt4d_ds_a"), b("volt4d_ds_b");
  build_dataset(small_dataset(), a.path, 1);
  build_dataset(small_dataset(), b.path, 3);
  for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path);
    EXPECT_EQ(read_file(entry.path()), read_file(b.path / rel)) << rel;
  }
}

TEST(Dataset, SplitsArePartitionsOfRois) {
  TempDir dir("volt4d_ds_split");
  DatasetConfig cfg = small_dataset();
  cfg.rois = 9;
  cfg.val_rois = 2;
  cfg.test_rois = 3;
  build_dataset(cfg, dir.path);
  const DatasetReader reader(dir.path);
  const auto& m = reader.manifest();
  std::set<std::uint32_t> all;
  for (const auto* v : {&m.train_rois, &m.val_rois, &m.test_rois}) all.insert(v->begin(), v->end());
  EXPECT_EQ(all.size(), 9u);
  EXPECT_EQ(m.train_rois.size() + m.val_rois.size() + m.test_rois.size(), 9u);
  for (Split s : {Split::Train, Split::Val, Split::Test})
    for (const Sample& x : reader.load_split(s)) EXPECT_EQ(m.split_of(x.roi_id), s);
}

TEST(Dataset, TruncationIsChecksumError) {
  TempDir dir("volt4d_ds_trunc");
  build_dataset(small_dataset(), dir.path);
  const fs::path file = dir.path / "samples" / sample_file_name({1, 1});
  auto bytes = read_file(file);
  write_file(file, bytes.data(), bytes.size() - 10);
  const DatasetReader reader(dir.path);
  EXPECT_EQ(kind_of([&] { reader.load({1, 1}); }), ErrorKind::Checksum);
}

TEST(Dataset, HeaderErrors) {
  TempDir dir("volt4d_ds_hdr");
  build_dataset(small_dataset(), dir.path);
  const fs::path file = dir.path / "samples" / sample_file_name({0, 0});
  const auto bytes = read_file(file);
  auto restamp = [](std::vector<unsigned char> b) {
    b.resize(b.size() - 4);
    detail::put_u32(b, detail::crc32_of(b.data(), b.size()));
    return b;
  };
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_sample(restamp(bad_magic), "x"); }), ErrorKind::Corrupt);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(kind_of([&] { decode_sample(restamp(bad_version), "x"); }), ErrorKind::Version);
  auto flipped = bytes;
  flipped[40] ^= 0x01;
  EXPECT_EQ(kind_of([&] { decode_sample(flipped, "x"); }), ErrorKind::Checksum);
  EXPECT_EQ(kind_of([&] { DatasetReader(dir.path / "nope"); }), ErrorKind::Io);
}

TEST(Dataset, LabelConsistencyAndDifficulty) {
  DatasetConfig cfg = small_dataset();
  cfg.rois = 4;
  cfg.trajectories_per_roi = 25;
  double now = 0.0, plus2 = 0.0;
  for (std::uint32_t r = 0; r < cfg.rois; ++r) {
    const Phantom ph = roi_phantom(cfg, r);
    for (std::uint32_t t = 0; t < cfg.trajectories_per_roi; ++t) {
      const Trajectory traj = sample_trajectory(cfg, {r, t});
      const Sample s = generate_sample(cfg, ph, {r, t});
      EXPECT_LE(norm(s.labels.now), traj.path_length(4) + 1e-12);
      for (int a = 0; a < 3; ++a) {
        EXPECT_NEAR(s.labels.now[a], traj.samples[4][a] - traj.samples[0][a], 1e-12);
        EXPECT_NEAR(s.labels.plus1[a], traj.samples[5][a] - traj.samples[0][a], 1e-12);
        EXPECT_NEAR(s.labels.plus2[a], traj.samples[6][a] - traj.samples[0][a], 1e-12);
      }
      EXPECT_LE(traj.max_step(), traj.magnitude_class);
      now += norm(s.labels.now);
      plus2 += norm(s.labels.plus2);
    }
  }
  EXPECT_GE(plus2, now);
}
