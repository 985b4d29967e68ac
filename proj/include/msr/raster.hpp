#pragma once

// Image rasters with explicit validity masks, and the RGB-D-normal-gravity
// bundle that flows through warping, prediction and I/O.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "msr/geometry.hpp"

namespace msr {

/// Default maximum valid depth in meters (capture range of the reference sensor).
inline constexpr double kDefaultMaxDepth = 5.46;

/// Row-major H x W grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(checked(width, height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  static long checked(int w, int h) {
    if (w < 0 || h < 0) throw InvalidArgument("Grid: negative dimensions");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

inline std::size_t count_valid(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

inline double valid_fraction(const Mask& m) {
  return m.size() == 0 ? 0.0 : static_cast<double>(count_valid(m)) / static_cast<double>(m.size());
}

/// Index of the pixel nearest to a continuous coordinate, or nullopt outside the grid.
inline std::optional<std::array<int, 2>> nearest_index(const Pixel& p, int width, int height) {
  const double fu = std::floor(p.u + 0.5);
  const double fv = std::floor(p.v + 0.5);
  if (!(fu >= 0.0) || !(fv >= 0.0) || fu > width - 1 || fv > height - 1) return std::nullopt;
  return std::array<int, 2>{static_cast<int>(fu), static_cast<int>(fv)};
}

/// Depth in meters; a pixel is valid only if flagged and its value lies in (0, max_depth].
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double max_depth = kDefaultMaxDepth)
      : values_(width, height, 0.0), valid_(width, height, 0), max_depth_(max_depth) {}

  int width() const { return values_.width(); }
  int height() const { return values_.height(); }
  double max_depth() const { return max_depth_; }

  /// Stores `d`; the pixel becomes valid iff d is in (0, max_depth].
  void set(int x, int y, double d) {
    const bool ok = std::isfinite(d) && d > 0.0 && d <= max_depth_;
    values_(x, y) = ok ? d : 0.0;
    valid_(x, y) = ok ? 1 : 0;
  }
  void invalidate(int x, int y) {
    values_(x, y) = 0.0;
    valid_(x, y) = 0;
  }

  /// Stores a value without the range check. For raw predictor output of
  /// unknown scale, which is only meaningful after scale_align.
  void set_unchecked(int x, int y, double d, bool valid) {
    values_(x, y) = d;
    valid_(x, y) = valid ? 1 : 0;
  }

  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  double at(int x, int y) const { return values_(x, y); }

  const Grid<double>& values() const { return values_; }
  const Mask& mask() const { return valid_; }
  double valid_fraction() const { return msr::valid_fraction(valid_); }

  bool operator==(const DepthMap&) const = default;

 private:
  Grid<double> values_;
  Mask valid_;
  double max_depth_ = kDefaultMaxDepth;
};

/// Per-pixel unit surface normals in the camera frame, facing the camera.
class NormalMap {
 public:
  NormalMap() = default;
  NormalMap(int width, int height) : vectors_(width, height, Vec3::Zero()), valid_(width, height, 0) {}

  int width() const { return vectors_.width(); }
  int height() const { return vectors_.height(); }

  /// Stores the normalized vector; zero or non-finite vectors invalidate the pixel.
  void set(int x, int y, const Vec3& n) {
    const double len = n.norm();
    if (!(len > kEpsilon) || !std::isfinite(len)) {
      invalidate(x, y);
      return;
    }
    vectors_(x, y) = n / len;
    valid_(x, y) = 1;
  }
  void invalidate(int x, int y) {
    vectors_(x, y) = Vec3::Zero();
    valid_(x, y) = 0;
  }

  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  const Vec3& at(int x, int y) const { return vectors_(x, y); }

  const Grid<Vec3>& vectors() const { return vectors_; }
  const Mask& mask() const { return valid_; }
  double valid_fraction() const { return msr::valid_fraction(valid_); }

 private:
  Grid<Vec3> vectors_;
  Mask valid_;
};

using Rgb8 = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster; the mask marks pixels that carry image content (after a
/// warp, pixels whose source fell outside the frame are cleared).
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, bool valid = true)
      : pixels_(width, height, Rgb8{0, 0, 0}), valid_(width, height, valid ? 1 : 0) {}

  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }

  void set(int x, int y, const Rgb8& c) {
    pixels_(x, y) = c;
    valid_(x, y) = 1;
  }
  void invalidate(int x, int y) {
    pixels_(x, y) = Rgb8{0, 0, 0};
    valid_(x, y) = 0;
  }

  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  const Rgb8& at(int x, int y) const { return pixels_(x, y); }

  const Grid<Rgb8>& pixels() const { return pixels_; }
  const Mask& mask() const { return valid_; }

  /// Bilinear sample; nullopt unless every neighbour with non-zero weight is
  /// in the frame and valid. Coordinates within 1e-9 of a pixel center snap to it.
  std::optional<std::array<double, 3>> sample_bilinear(const Pixel& p) const {
    constexpr double snap = 1e-9;
    double u = p.u;
    double v = p.v;
    if (std::abs(u - std::round(u)) < snap) u = std::round(u);
    if (std::abs(v - std::round(v)) < snap) v = std::round(v);
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    if (!(fu >= 0.0) || !(fv >= 0.0) || fu > width() - 1 || fv > height() - 1) return std::nullopt;
    const int x0 = static_cast<int>(fu);
    const int y0 = static_cast<int>(fv);
    const double ax = u - fu;
    const double ay = v - fv;
    const int x1 = ax > 0.0 ? x0 + 1 : x0;
    const int y1 = ay > 0.0 ? y0 + 1 : y0;
    if (x1 >= width() || y1 >= height()) return std::nullopt;
    if (!valid(x0, y0) || !valid(x1, y0) || !valid(x0, y1) || !valid(x1, y1)) return std::nullopt;
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c) {
      const double top = (1.0 - ax) * at(x0, y0)[c] + ax * at(x1, y0)[c];
      const double bottom = (1.0 - ax) * at(x0, y1)[c] + ax * at(x1, y1)[c];
      out[c] = (1.0 - ay) * top + ay * bottom;
    }
    return out;
  }

 private:
  Grid<Rgb8> pixels_;
  Mask valid_;
};

inline Rgb8 to_rgb8(const std::array<double, 3>& c) {
  Rgb8 out{};
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(c[i]), 0L, 255L));
  }
  return out;
}

/// One RGB-D sample: co-registered rasters plus camera-frame gravity.
struct FrameBundle {
  RgbImage rgb;
  DepthMap depth;
  NormalMap normals;
  UnitVector3 gravity{0.0, 1.0, 0.0};
  CameraIntrinsics intrinsics;

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }

  /// Throws SizeMismatch unless every raster matches the intrinsics' image size.
  void validate() const {
    const int w = intrinsics.width;
    const int h = intrinsics.height;
    if (rgb.width() != w || rgb.height() != h || depth.width() != w || depth.height() != h ||
        normals.width() != w || normals.height() != h) {
      throw SizeMismatch("FrameBundle: rasters do not share the intrinsics' image size");
    }
  }
};

}  // namespace msr
