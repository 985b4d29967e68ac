#pragma once

// Rotations, unit directions, pinhole intrinsics and the rotation-induced
// pixel warp.
//
// Camera frame convention for the whole library: x right, y down, z forward.
// An upright camera therefore sees gravity as (0, 1, 0).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "msr/error.hpp"

namespace msr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Guard used wherever a denominator or a ray z-component may vanish.
inline constexpr double kEpsilon = 1e-8;

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Angle between two vectors in radians, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// A direction on S^2. Construction normalizes; zero or non-finite input throws.
class UnitVector3 {
 public:
  UnitVector3() : v_(0.0, 0.0, 1.0) {}
  UnitVector3(double x, double y, double z) : UnitVector3(Vec3(x, y, z)) {}
  explicit UnitVector3(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw InvalidArgument("UnitVector3: zero or non-finite vector");
    }
    v_ = v / n;
  }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Vec3& vec() const { return v_; }

  double dot(const UnitVector3& o) const { return v_.dot(o.v_); }
  UnitVector3 operator-() const { return UnitVector3(-v_); }

 private:
  Vec3 v_;
};

/// Angle between two unit directions in radians.
inline double angle_between(const UnitVector3& a, const UnitVector3& b) {
  return angle_between(a.vec(), b.vec());
}

/// Element of SO(3).
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}

  /// Validates orthonormality and det = +1 within `tol`.
  static Rotation3 from_matrix(const Mat3& m, double tol = 1e-9) {
    if (!m.allFinite()) throw InvalidArgument("Rotation3: non-finite matrix");
    const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = m.determinant();
    if (ortho > tol || std::abs(det - 1.0) > tol) {
      throw InvalidArgument("Rotation3: matrix is not a proper rotation");
    }
    return Rotation3(m);
  }

  /// Exponential map of a rotation vector (axis * angle, radians).
  static Rotation3 exp(const Vec3& omega) {
    const double theta = omega.norm();
    if (theta < 1e-15) return Rotation3();
    return Rotation3(Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix());
  }

  static Rotation3 about_axis(const Vec3& axis, double angle_rad) {
    return exp(axis.normalized() * angle_rad);
  }
  static Rotation3 about_x(double angle_rad) { return about_axis(Vec3::UnitX(), angle_rad); }
  static Rotation3 about_y(double angle_rad) { return about_axis(Vec3::UnitY(), angle_rad); }
  static Rotation3 about_z(double angle_rad) { return about_axis(Vec3::UnitZ(), angle_rad); }

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Rotation3 inverse() const { return Rotation3(m_.transpose()); }
  Rotation3 operator*(const Rotation3& o) const { return Rotation3(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  UnitVector3 operator*(const UnitVector3& v) const { return UnitVector3(m_ * v.vec()); }

  /// Rotation angle in [0, pi].
  double angle() const {
    const double c = std::clamp((m_.trace() - 1.0) * 0.5, -1.0, 1.0);
    const Vec3 s(m_(2, 1) - m_(1, 2), m_(0, 2) - m_(2, 0), m_(1, 0) - m_(0, 1));
    return std::atan2(0.5 * s.norm(), c);
  }

 private:
  explicit Rotation3(const Mat3& m) : m_(m) {}
  friend Rotation3 rotation_between(const UnitVector3& g, const UnitVector3& r);

  Mat3 m_;
};

/// Angle of a * b^-1.
inline double geodesic_distance(const Rotation3& a, const Rotation3& b) {
  return (a * b.inverse()).angle();
}

/// Minimal rotation taking `g` onto `r`:
///   R = I + 2 r g^T - (r + g)(r + g)^T / (1 + r^T g).
/// Throws AntipodalInput when 1 + r^T g <= kEpsilon.
inline Rotation3 rotation_between(const UnitVector3& g, const UnitVector3& r) {
  const double denom = 1.0 + r.dot(g);
  if (denom <= kEpsilon) {
    throw AntipodalInput("rotation_between: directions are antipodal");
  }
  const Vec3 s = r.vec() + g.vec();
  const Mat3 m = Mat3::Identity() + 2.0 * r.vec() * g.vec().transpose() - (s * s.transpose()) / denom;
  return Rotation3(m);
}

/// Rectifying rotation parametrized by gravity and principal direction: R g = e.
inline Rotation3 rotation_from_gravity_principal(const UnitVector3& g, const UnitVector3& e) {
  return rotation_between(g, e);
}

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole intrinsics with image size. Pixel centers sit at integer coordinates.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int width_, int height_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(width_), height(height_) {
    validate();
  }

  /// Square pixels, principal point at the image center.
  static CameraIntrinsics centered(int width, int height, double focal) {
    return {focal, focal, 0.5 * width, 0.5 * height, width, height};
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || width < 1 || height < 1 || !std::isfinite(cx) ||
        !std::isfinite(cy)) {
      throw InvalidArgument("CameraIntrinsics: requires fx, fy > 0 and a non-empty image");
    }
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
  Mat3 inverse_matrix() const {
    Mat3 k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
  }

  /// K^-1 x~, normalized to z = 1.
  Vec3 back_project(const Pixel& x) const { return {(x.u - cx) / fx, (x.v - cy) / fy, 1.0}; }

  /// Projection of a ray with positive z.
  Pixel project(const Vec3& ray) const {
    return {fx * ray.x() / ray.z() + cx, fy * ray.y() / ray.z() + cy};
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

/// H = K R K^-1: maps homogeneous tilted-image pixels to rectified-image pixels.
inline Mat3 homography_from_rotation(const CameraIntrinsics& k, const Rotation3& r) {
  return k.matrix() * r.matrix() * k.inverse_matrix();
}

/// (R K^-1 x~)_z. Depth of a point seen through `x` scales by this factor when
/// the camera is rotated by `r`.
inline double ray_z_factor(const Pixel& x, const CameraIntrinsics& k, const Rotation3& r) {
  return r.matrix().row(2).dot(k.back_project(x));
}

/// Maps a pixel of the tilted image into the image of the camera rotated by `r`.
/// Returns nullopt when the rotated ray leaves the forward hemisphere.
inline std::optional<Pixel> warp_point(const Pixel& x, const CameraIntrinsics& k,
                                       const Rotation3& r) {
  const Vec3 ray = r * k.back_project(x);
  if (ray.z() <= kEpsilon) return std::nullopt;
  return k.project(ray);
}

}  // namespace msr
