#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "volt4d/tensor.hpp"

namespace volt4d {

/// Time-ordered stack of volumes x_t0 .. x_tn, stored as (T, D, H, W).
class VolumeSequence {
 public:
  VolumeSequence() = default;
  explicit VolumeSequence(Tensor frames) : frames_(std::move(frames)) {
    if (frames_.rank() != 4) fail(ErrorKind::InvalidShape, "volume sequence must be (T,D,H,W), got " +
                                                               shape_string(frames_.shape()));
  }

  std::size_t length() const { return frames_.dim(0); }
  Shape volume_shape() const { return {frames_.dim(1), frames_.dim(2), frames_.dim(3)}; }
  const Tensor& frames() const noexcept { return frames_; }
  Tensor& frames() noexcept { return frames_; }

  Tensor frame(std::size_t t) const { return slice(frames_, 0, t, 1).reshaped(volume_shape()); }

  friend bool operator==(const VolumeSequence&, const VolumeSequence&) = default;

 private:
  Tensor frames_;
};

/// Current displacement and the two forecasts, each a 3-vector in mm along
/// (depth, height, width).
struct MotionTriple {
  Vec3 now{};
  Vec3 plus1{};
  Vec3 plus2{};

  static constexpr std::size_t kComponents = 9;

  std::array<double, kComponents> flat() const {
    return {now[0], now[1], now[2], plus1[0], plus1[1], plus1[2], plus2[0], plus2[1], plus2[2]};
  }

  const Vec3& horizon(std::size_t h) const { return h == 0 ? now : (h == 1 ? plus1 : plus2); }

  bool all_finite() const {
    for (double v : flat())
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const MotionTriple&, const MotionTriple&) = default;
};

template <typename Derived>
Derived motion_from_flat(std::span<const double> v) {
  if (v.size() != MotionTriple::kComponents)
    fail(ErrorKind::ShapeMismatch, "motion vector needs 9 components, got " + std::to_string(v.size()));
  Derived m;
  for (std::size_t i = 0; i < 3; ++i) {
    m.now[i] = v[i];
    m.plus1[i] = v[3 + i];
    m.plus2[i] = v[6 + i];
  }
  return m;
}

struct MotionLabels : MotionTriple {};
struct MotionPrediction : MotionTriple {};

enum class Horizon { Now = 0, Plus1 = 1, Plus2 = 2 };

inline std::string_view to_string(Horizon h) {
  switch (h) {
    case Horizon::Now: return "now";
    case Horizon::Plus1: return "+1";
    case Horizon::Plus2: return "+2";
  }
  return "?";
}

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

}  // namespace volt4d
