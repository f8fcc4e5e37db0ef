#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "volt4d/error.hpp"
#include "volt4d/rng.hpp"

namespace volt4d {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

inline void validate_shape(const Shape& shape) {
  if (shape.empty()) fail(ErrorKind::InvalidShape, "tensor shape must have at least one axis");
  for (auto n : shape)
    if (n == 0) fail(ErrorKind::InvalidShape, "zero axis length in shape " + shape_string(shape));
}

/// How a random fill is drawn. The buffer element i always comes from draw i
/// of a SplitMix64 counter stream keyed by `seed`.
struct RandomFill {
  enum class Distribution { Uniform, Normal };
  Distribution distribution = Distribution::Uniform;
  std::uint64_t seed = 0;
  double a = 0.0;  // uniform: low,  normal: mean
  double b = 1.0;  // uniform: high, normal: stddev
};

/// Dense row-major tensor of f64 scalars.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_numel(shape_))
      fail(ErrorKind::ShapeMismatch, "buffer of " + std::to_string(data_.size()) +
                                         " values does not fit shape " + shape_string(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }

  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }

  static Tensor random(Shape shape, const RandomFill& spec) {
    Tensor t(std::move(shape));
    CounterRng rng(spec.seed);
    for (auto& v : t.data_) {
      v = spec.distribution == RandomFill::Distribution::Uniform ? rng.uniform(spec.a, spec.b)
                                                                  : rng.normal(spec.a, spec.b);
    }
    return t;
  }

  static Tensor uniform(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    return random(std::move(shape), {RandomFill::Distribution::Uniform, seed, lo, hi});
  }

  static Tensor normal(Shape shape, std::uint64_t seed, double mean = 0.0, double stddev = 1.0) {
    return random(std::move(shape), {RandomFill::Distribution::Normal, seed, mean, stddev});
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  Shape strides() const { return row_major_strides(shape_); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }
  std::vector<double>& buffer() noexcept { return data_; }
  const std::vector<double>& buffer() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size())
      fail(ErrorKind::InvalidAxis, "index rank " + std::to_string(index.size()) +
                                       " does not match tensor rank " + std::to_string(rank()));
    std::size_t off = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] >= shape_[i]) fail(ErrorKind::OutOfBounds, "index out of range on axis " + std::to_string(i));
      off = off * shape_[i] + index[i];
    }
    return off;
  }

  double& at(std::initializer_list<std::size_t> index) {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
  }
  double at(std::initializer_list<std::size_t> index) const {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
  }

  Tensor reshaped(Shape shape) const {
    validate_shape(shape);
    if (shape_numel(shape) != size())
      fail(ErrorKind::ShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
  }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  void require_same_shape(const Tensor& other, std::string_view what) const {
    if (shape_ != other.shape_)
      fail(ErrorKind::ShapeMismatch, std::string(what) + ": " + shape_string(shape_) + " vs " +
                                         shape_string(other.shape_));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Axis roles

enum class Axis : std::uint8_t { Batch = 0, Time = 1, Channel = 2, Depth = 3, Height = 4, Width = 5 };

/// Ordered subset of axis roles describing a feature-map tensor. Roles keep
/// the fixed order batch, time, channel, depth, height, width.
class AxisLayout {
 public:
  AxisLayout(std::initializer_list<Axis> roles) : roles_(roles) {
    for (std::size_t i = 1; i < roles_.size(); ++i)
      if (static_cast<int>(roles_[i]) <= static_cast<int>(roles_[i - 1]))
        fail(ErrorKind::InvalidAxis, "axis roles must be unique and in (batch,time,channel,depth,height,width) order");
  }

  static AxisLayout volume() { return {Axis::Channel, Axis::Depth, Axis::Height, Axis::Width}; }
  static AxisLayout sequence() { return {Axis::Time, Axis::Channel, Axis::Depth, Axis::Height, Axis::Width}; }

  std::size_t rank() const noexcept { return roles_.size(); }
  bool has(Axis role) const { return std::find(roles_.begin(), roles_.end(), role) != roles_.end(); }

  std::size_t index_of(Axis role) const {
    auto it = std::find(roles_.begin(), roles_.end(), role);
    if (it == roles_.end()) fail(ErrorKind::InvalidAxis, "axis role not present in layout");
    return static_cast<std::size_t>(it - roles_.begin());
  }

  /// Every axis except the channel axis, i.e. the axes global average pooling removes.
  std::vector<std::size_t> non_channel_axes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles_.size(); ++i)
      if (roles_[i] != Axis::Channel) out.push_back(i);
    return out;
  }

 private:
  std::vector<Axis> roles_;
};

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor concat(std::span<const Tensor> tensors, std::size_t axis) {
  if (tensors.empty()) fail(ErrorKind::ShapeMismatch, "concat of an empty tensor list");
  const Shape& first = tensors[0].shape();
  if (axis >= first.size()) fail(ErrorKind::InvalidAxis, "concat axis " + std::to_string(axis) + " out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& t : tensors) {
    if (t.rank() != first.size())
      fail(ErrorKind::ShapeMismatch, "concat rank mismatch: " + shape_string(first) + " vs " + shape_string(t.shape()));
    for (std::size_t i = 0; i < first.size(); ++i)
      if (i != axis && t.dim(i) != first[i])
        fail(ErrorKind::ShapeMismatch, "concat non-axis length mismatch: " + shape_string(first) + " vs " +
                                           shape_string(t.shape()));
    out_shape[axis] += t.dim(axis);
  }
  const std::size_t outer = shape_numel(Shape(first.begin(), first.begin() + static_cast<long>(axis)));
  const std::size_t inner = shape_numel(Shape(first.begin() + static_cast<long>(axis) + 1, first.end()));
  Tensor out(out_shape);
  double* dst = out.ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    for (const auto& t : tensors) {
      const std::size_t chunk = t.dim(axis) * inner;
      std::copy_n(t.ptr() + o * chunk, chunk, dst);
      dst += chunk;
    }
  }
  return out;
}

inline Tensor concat(std::initializer_list<Tensor> tensors, std::size_t axis) {
  return concat(std::span<const Tensor>(tensors.begin(), tensors.size()), axis);
}

/// Contiguous range [begin, begin+length) along `axis`.
inline Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t length) {
  if (axis >= t.rank()) fail(ErrorKind::InvalidAxis, "slice axis out of range");
  if (length == 0 || begin + length > t.dim(axis)) fail(ErrorKind::OutOfBounds, "slice range out of bounds");
  const Shape& s = t.shape();
  const std::size_t outer = shape_numel(Shape(s.begin(), s.begin() + static_cast<long>(axis)));
  const std::size_t inner = shape_numel(Shape(s.begin() + static_cast<long>(axis) + 1, s.end()));
  Shape out_shape = s;
  out_shape[axis] = length;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(t.ptr() + (o * s[axis] + begin) * inner, length * inner, out.ptr() + o * length * inner);
  return out;
}

inline std::vector<std::size_t> checked_axes(const Tensor& t, std::span<const std::size_t> axes) {
  std::vector<std::size_t> sorted(axes.begin(), axes.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] >= t.rank()) fail(ErrorKind::InvalidAxis, "axis " + std::to_string(sorted[i]) + " out of range");
    if (i && sorted[i] == sorted[i - 1]) fail(ErrorKind::InvalidAxis, "duplicate axis " + std::to_string(sorted[i]));
  }
  return sorted;
}

/// Mean over `axes`; reduced axes are removed. Reducing every axis yields shape [1].
inline Tensor reduce_mean(const Tensor& t, std::span<const std::size_t> axes) {
  const auto sorted = checked_axes(t, axes);
  std::vector<bool> reduced(t.rank(), false);
  for (auto a : sorted) reduced[a] = true;

  Shape out_shape;
  Shape keep_stride(t.rank(), 0);  // stride into the output for each input axis
  for (std::size_t i = 0; i < t.rank(); ++i)
    if (!reduced[i]) out_shape.push_back(t.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  {
    std::size_t stride = 1;
    for (std::size_t i = t.rank(); i-- > 0;) {
      if (!reduced[i]) {
        keep_stride[i] = stride;
        stride *= t.dim(i);
      }
    }
  }
  Tensor out(out_shape);
  std::vector<std::size_t> idx(t.rank(), 0);
  std::size_t out_off = 0;
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    out[out_off] += t[flat];
    for (std::size_t ax = t.rank(); ax-- > 0;) {
      if (++idx[ax] < t.dim(ax)) {
        out_off += keep_stride[ax];
        break;
      }
      out_off -= keep_stride[ax] * (t.dim(ax) - 1);
      idx[ax] = 0;
    }
  }
  const double count = static_cast<double>(t.size()) / static_cast<double>(out.size());
  for (auto& v : out.data()) v /= count;
  return out;
}

inline Tensor reduce_mean(const Tensor& t, std::initializer_list<std::size_t> axes) {
  return reduce_mean(t, std::span<const std::size_t>(axes.begin(), axes.size()));
}

// ---------------------------------------------------------------------------
// Interpolation

using Vec3 = std::array<double, 3>;

/// Trilinear interpolation of a rank-3 (depth, height, width) volume at a
/// continuous voxel coordinate.
inline double trilinear_sample(const Tensor& volume, const Vec3& p) {
  if (volume.rank() != 3) fail(ErrorKind::InvalidShape, "trilinear_sample expects a rank-3 volume");
  const std::size_t nd = volume.dim(0), nh = volume.dim(1), nw = volume.dim(2);
  const std::array<std::size_t, 3> n{nd, nh, nw};
  std::array<std::size_t, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const double hi = static_cast<double>(n[a] - 1);
    if (!(p[a] >= 0.0 && p[a] <= hi))
      fail(ErrorKind::OutOfBounds, "sample point outside volume on axis " + std::to_string(a));
    std::size_t base = static_cast<std::size_t>(std::floor(p[a]));
    if (base == n[a] - 1 && n[a] > 1) base -= 1;
    i0[a] = base;
    f[a] = p[a] - static_cast<double>(base);
  }
  const double* v = volume.ptr();
  auto at = [&](std::size_t d, std::size_t h, std::size_t w) {
    d = std::min(d, nd - 1);
    h = std::min(h, nh - 1);
    w = std::min(w, nw - 1);
    return v[(d * nh + h) * nw + w];
  };
  const auto [d, h, w] = i0;
  const double c00 = at(d, h, w) * (1 - f[2]) + at(d, h, w + 1) * f[2];
  const double c01 = at(d, h + 1, w) * (1 - f[2]) + at(d, h + 1, w + 1) * f[2];
  const double c10 = at(d + 1, h, w) * (1 - f[2]) + at(d + 1, h, w + 1) * f[2];
  const double c11 = at(d + 1, h + 1, w) * (1 - f[2]) + at(d + 1, h + 1, w + 1) * f[2];
  const double c0 = c00 * (1 - f[1]) + c01 * f[1];
  const double c1 = c10 * (1 - f[1]) + c11 * f[1];
  return c0 * (1 - f[0]) + c1 * f[0];
}

}  // namespace volt4d
