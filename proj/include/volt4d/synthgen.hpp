#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "volt4d/error.hpp"
#include "volt4d/motion.hpp"
#include "volt4d/rng.hpp"
#include "volt4d/tensor.hpp"

namespace volt4d {

// ---------------------------------------------------------------------------
// Phantom: tissue-like texture from which shifted fields of view are resampled.

struct Phantom {
  Tensor volume;     // (D, H, W), values in [0, 1]
  Vec3 voxel_pitch;  // mm per voxel along (depth, height, width)
  std::uint64_t seed = 0;
};

/// Octave cell sizes in voxels and their amplitudes; the finest octave gives
/// the speckle-like grain.
inline constexpr std::array<double, 4> kPhantomCells{8.0, 4.0, 2.0, 1.0};
inline constexpr std::array<double, 4> kPhantomAmplitudes{1.0, 0.6, 0.45, 0.3};

namespace detail {

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Value-noise octave: random lattice values every `cell` voxels, blended with
/// smoothstep-weighted trilinear interpolation.
inline void add_value_noise(Tensor& out, std::uint64_t seed, double cell, double amplitude) {
  const std::size_t nd = out.dim(0), nh = out.dim(1), nw = out.dim(2);
  const std::size_t ld = static_cast<std::size_t>(std::ceil(static_cast<double>(nd) / cell)) + 2;
  const std::size_t lh = static_cast<std::size_t>(std::ceil(static_cast<double>(nh) / cell)) + 2;
  const std::size_t lw = static_cast<std::size_t>(std::ceil(static_cast<double>(nw) / cell)) + 2;
  std::vector<double> lattice(ld * lh * lw);
  for (std::size_t i = 0; i < lattice.size(); ++i) lattice[i] = 2.0 * to_unit(splitmix64_at(seed, i)) - 1.0;
  auto L = [&](std::size_t a, std::size_t b, std::size_t c) { return lattice[(a * lh + b) * lw + c]; };
  for (std::size_t d = 0; d < nd; ++d) {
    const double fd = static_cast<double>(d) / cell;
    const std::size_t d0 = static_cast<std::size_t>(fd);
    const double wd = smoothstep(fd - static_cast<double>(d0));
    for (std::size_t h = 0; h < nh; ++h) {
      const double fh = static_cast<double>(h) / cell;
      const std::size_t h0 = static_cast<std::size_t>(fh);
      const double wh = smoothstep(fh - static_cast<double>(h0));
      double* row = out.ptr() + (d * nh + h) * nw;
      for (std::size_t w = 0; w < nw; ++w) {
        const double fw = static_cast<double>(w) / cell;
        const std::size_t w0 = static_cast<std::size_t>(fw);
        const double ww = smoothstep(fw - static_cast<double>(w0));
        const double c00 = L(d0, h0, w0) * (1 - ww) + L(d0, h0, w0 + 1) * ww;
        const double c01 = L(d0, h0 + 1, w0) * (1 - ww) + L(d0, h0 + 1, w0 + 1) * ww;
        const double c10 = L(d0 + 1, h0, w0) * (1 - ww) + L(d0 + 1, h0, w0 + 1) * ww;
        const double c11 = L(d0 + 1, h0 + 1, w0) * (1 - ww) + L(d0 + 1, h0 + 1, w0 + 1) * ww;
        const double c0 = c00 * (1 - wh) + c01 * wh;
        const double c1 = c10 * (1 - wh) + c11 * wh;
        row[w] += amplitude * (c0 * (1 - wd) + c1 * wd);
      }
    }
  }
}

}  // namespace detail

/// Multi-octave value-noise volume normalised to [0, 1]. `required` is the
/// smallest admissible size (field of view plus twice the maximum excursion).
inline Phantom generate_phantom(std::uint64_t seed, const std::array<std::size_t, 3>& size, const Vec3& pitch,
                                const std::array<std::size_t, 3>& required = {1, 1, 1}) {
  for (int a = 0; a < 3; ++a)
    if (size[a] < required[a] || size[a] == 0)
      fail(ErrorKind::Config, "phantom axis " + std::to_string(a) + " has " + std::to_string(size[a]) +
                                  " voxels, at least " + std::to_string(required[a]) + " required");
  Phantom p{Tensor::zeros({size[0], size[1], size[2]}), pitch, seed};
  for (std::size_t o = 0; o < kPhantomCells.size(); ++o)
    detail::add_value_noise(p.volume, derive_seed(seed, o), kPhantomCells[o], kPhantomAmplitudes[o]);
  const auto [lo, hi] = std::minmax_element(p.volume.data().begin(), p.volume.data().end());
  const double mn = *lo, range = *hi - *lo;
  for (auto& v : p.volume.data()) v = range > 0 ? std::clamp((v - mn) / range, 0.0, 1.0) : 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// Catmull-Rom spline, uniform parameterisation.

/// n control points give n-3 segments spanning the interior knots
/// p[1] .. p[n-2]; u = 0 maps to p[1] and u = 1 to p[n-2].
inline Vec3 spline_eval(std::span<const Vec3> control_points, double u) {
  const std::size_t n = control_points.size();
  if (n < 4) fail(ErrorKind::Config, "Catmull-Rom spline needs at least 4 control points");
  if (!(u >= 0.0 && u <= 1.0)) fail(ErrorKind::OutOfBounds, "spline parameter must lie in [0, 1]");
  const std::size_t segments = n - 3;
  const double s = u * static_cast<double>(segments);
  const std::size_t seg = std::min(static_cast<std::size_t>(s), segments - 1);
  const double t = s - static_cast<double>(seg);
  const double t2 = t * t, t3 = t2 * t;
  const Vec3& p0 = control_points[seg];
  const Vec3& p1 = control_points[seg + 1];
  const Vec3& p2 = control_points[seg + 2];
  const Vec3& p3 = control_points[seg + 3];
  Vec3 out{};
  for (int a = 0; a < 3; ++a) {
    out[a] = 0.5 * ((2.0 * p1[a]) + (-p0[a] + p2[a]) * t + (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * t2 +
                    (-p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a]) * t3);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

struct Trajectory {
  std::vector<Vec3> control_points;  // mm
  std::vector<Vec3> samples;         // positions at t0 .. t_{n+2}, mm; samples[0] is the origin
  double magnitude_class = 0.0;      // bound on consecutive-sample displacement, mm

  double max_step() const {
    double m = 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i) m = std::max(m, norm(samples[i] - samples[i - 1]));
    return m;
  }

  double path_length(std::size_t last) const {
    double len = 0.0;
    for (std::size_t i = 1; i <= last && i < samples.size(); ++i) len += norm(samples[i] - samples[i - 1]);
    return len;
  }
};

inline constexpr std::size_t kTrajectoryControlPoints = 6;

inline std::vector<Vec3> sample_spline(std::span<const Vec3> control_points, std::size_t count) {
  std::vector<Vec3> samples;
  for (std::size_t k = 0; k < count; ++k)
    samples.push_back(spline_eval(control_points, static_cast<double>(k) / static_cast<double>(count - 1)));
  return samples;
}

/// Smooth random curve through a jittered random walk, shifted so that
/// samples[0] is the origin and scaled so that the largest consecutive step
/// is magnitude_class times a random factor in [0.5, 1).
inline Trajectory generate_trajectory(std::uint64_t seed, double magnitude_class, std::size_t sample_count = 7) {
  if (!(magnitude_class > 0.0)) fail(ErrorKind::Config, "magnitude class must be > 0");
  if (sample_count < 2) fail(ErrorKind::Config, "a trajectory needs at least 2 samples");
  CounterRng rng(seed);
  auto random_unit = [&] {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = norm(v);
    return n > 0 ? (1.0 / n) * v : Vec3{1.0, 0.0, 0.0};
  };
  std::vector<Vec3> cps;
  Vec3 position{0, 0, 0};
  Vec3 heading = random_unit();
  for (std::size_t i = 0; i < kTrajectoryControlPoints; ++i) {
    cps.push_back(position);
    const Vec3 turned = heading + 0.9 * random_unit();
    heading = (1.0 / std::max(norm(turned), 1e-12)) * turned;
    position = position + rng.uniform(0.5, 1.5) * heading;
  }
  const Vec3 anchor = spline_eval(cps, 0.0);
  for (auto& p : cps) p = p - anchor;

  Trajectory traj;
  traj.magnitude_class = magnitude_class;
  traj.samples = sample_spline(cps, sample_count);
  const double raw_step = traj.max_step();
  const double target = magnitude_class * rng.uniform(0.5, 1.0);
  double scale = raw_step > 0.0 ? target / raw_step : 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    traj.control_points.clear();
    for (const auto& p : cps) traj.control_points.push_back(scale * p);
    traj.samples = sample_spline(traj.control_points, sample_count);
    if (traj.max_step() <= magnitude_class) break;
    scale *= 1.0 - 1e-12;
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Rendering

struct Sample {
  VolumeSequence sequence;
  MotionLabels labels;
  std::uint32_t roi_id = 0;
  std::uint32_t trajectory_id = 0;
};

struct RenderConfig {
  std::array<std::size_t, 3> volume_size{12, 12, 12};
  std::size_t sequence_length = 5;
  double noise_sigma = 0.02;
  std::uint64_t noise_seed = 0;
};

/// Labels: displacement of samples[T-1], samples[T], samples[T+1] relative
/// to samples[0].
inline MotionLabels labels_from_trajectory(const Trajectory& traj, std::size_t sequence_length) {
  if (traj.samples.size() < sequence_length + 2)
    fail(ErrorKind::Config, "trajectory has too few samples for the requested sequence length");
  MotionLabels l;
  const Vec3& origin = traj.samples[0];
  l.now = traj.samples[sequence_length - 1] - origin;
  l.plus1 = traj.samples[sequence_length] - origin;
  l.plus2 = traj.samples[sequence_length + 1] - origin;
  return l;
}

/// Volume t is the trilinear resampling of the phantom over the field of view
/// anchored at roi_origin + samples[t]. Values are rounded to f32 precision,
/// the on-disk storage format.
inline Sample render_sequence(const Phantom& phantom, const Vec3& roi_origin, const Trajectory& traj,
                              const RenderConfig& cfg) {
  const auto [nd, nh, nw] = cfg.volume_size;
  const std::size_t T = cfg.sequence_length;
  Sample s;
  s.labels = labels_from_trajectory(traj, T);
  Tensor frames({T, nd, nh, nw});
  CounterRng noise(cfg.noise_seed);
  const std::array<std::size_t, 3> extent{nd, nh, nw};
  for (std::size_t t = 0; t < T; ++t) {
    Vec3 anchor{};
    for (int a = 0; a < 3; ++a) {
      anchor[a] = (roi_origin[a] + traj.samples[t][a]) / phantom.voxel_pitch[a];
      const double last = anchor[a] + static_cast<double>(extent[a] - 1);
      if (anchor[a] < 0.0 || last > static_cast<double>(phantom.volume.dim(a) - 1))
        fail(ErrorKind::OutOfBounds, "field of view leaves the phantom at timestep " + std::to_string(t) +
                                         " on axis " + std::to_string(a));
    }
    double* dst = frames.ptr() + t * nd * nh * nw;
    for (std::size_t d = 0; d < nd; ++d)
      for (std::size_t h = 0; h < nh; ++h)
        for (std::size_t w = 0; w < nw; ++w) {
          const Vec3 p{anchor[0] + static_cast<double>(d), anchor[1] + static_cast<double>(h),
                       anchor[2] + static_cast<double>(w)};
          double v = trilinear_sample(phantom.volume, p);
          if (cfg.noise_sigma > 0.0) v += noise.normal(0.0, cfg.noise_sigma);
          *dst++ = static_cast<double>(static_cast<float>(v));
        }
  }
  s.sequence = VolumeSequence(std::move(frames));
  return s;
}

}  // namespace volt4d
