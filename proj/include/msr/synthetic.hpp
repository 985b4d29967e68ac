#pragma once

// Analytic ray caster for plane/box scenes. Produces exact depth, normals and
// gravity for any camera pose, which is what the equivariance tests compare
// against.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "msr/geometry.hpp"
#include "msr/raster.hpp"

namespace msr {

/// Square patch of half-size `extent` centered at `point`.
struct PlanePrimitive {
  Vec3 point = Vec3::Zero();
  UnitVector3 normal{0.0, 0.0, -1.0};
  double extent = 1.0;
};

/// Axis-aligned box in world coordinates.
struct BoxPrimitive {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
};

struct Primitive {
  std::variant<PlanePrimitive, BoxPrimitive> shape;
  /// Side length of one checker square, meters.
  double checker_period = 0.5;
  std::array<double, 3> tint{1.0, 1.0, 1.0};
};

struct Scene {
  std::vector<Primitive> primitives;
  UnitVector3 gravity_world{0.0, 1.0, 0.0};

  void validate() const {
    if (primitives.empty()) throw InvalidArgument("Scene: no primitives");
    for (const auto& p : primitives) {
      if (!(p.checker_period > 0.0)) throw InvalidArgument("Scene: checker period must be positive");
      if (const auto* plane = std::get_if<PlanePrimitive>(&p.shape)) {
        if (!(plane->extent > 0.0)) throw InvalidArgument("Scene: plane extent must be positive");
      } else {
        const auto& box = std::get<BoxPrimitive>(p.shape);
        if (!((box.max - box.min).minCoeff() > 0.0)) throw InvalidArgument("Scene: box extents must be positive");
      }
    }
  }
};

/// World-to-camera rotation and camera center in world coordinates.
struct CameraPose {
  Rotation3 rotation;
  Vec3 position = Vec3::Zero();
};

enum class TiltAxis { Roll, Pitch };

/// Camera rotation for a tilt in degrees. Positive pitch looks down: gravity
/// moves from (0, 1, 0) toward the optical axis.
inline Rotation3 tilt_rotation(double angle_deg, TiltAxis axis) {
  return axis == TiltAxis::Pitch ? Rotation3::about_x(deg2rad(angle_deg)) : Rotation3::about_z(deg2rad(angle_deg));
}

/// Gravity seen by an upright camera tilted by `angle_deg`.
inline UnitVector3 tilted_gravity(double angle_deg, TiltAxis axis) {
  return tilt_rotation(angle_deg, axis) * UnitVector3(0.0, 1.0, 0.0);
}

namespace detail {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();  // world frame, not yet oriented
  double a = 0.0;              // in-surface texture coordinates, meters
  double b = 0.0;
  std::size_t primitive = 0;
};

inline void plane_axes(const Vec3& n, Vec3& u, Vec3& v) {
  const Vec3 helper = std::abs(n.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  u = n.cross(helper).normalized();
  v = n.cross(u);
}

inline std::optional<Hit> intersect(const PlanePrimitive& p, const Vec3& origin, const Vec3& dir) {
  const Vec3& n = p.normal.vec();
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = n.dot(p.point - origin) / denom;
  if (!(t > 1e-9)) return std::nullopt;
  const Vec3 local = origin + t * dir - p.point;
  Vec3 u;
  Vec3 v;
  plane_axes(n, u, v);
  const double a = local.dot(u);
  const double b = local.dot(v);
  if (std::abs(a) > p.extent || std::abs(b) > p.extent) return std::nullopt;
  return Hit{t, n, a, b, 0};
}

inline std::optional<Hit> intersect(const BoxPrimitive& box, const Vec3& origin, const Vec3& dir) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  int far_axis = -1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dir[k]) < 1e-15) {
      if (origin[k] < box.min[k] || origin[k] > box.max[k]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[k] - origin[k]) / dir[k];
    double t1 = (box.max[k] - origin[k]) / dir[k];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      near_axis = k;
    }
    if (t1 < t_far) {
      t_far = t1;
      far_axis = k;
    }
  }
  if (t_near > t_far || t_far <= 1e-9) return std::nullopt;
  // Camera inside the box sees the far faces.
  const bool inside = t_near <= 1e-9;
  const double t = inside ? t_far : t_near;
  const int axis = inside ? far_axis : near_axis;
  if (axis < 0) return std::nullopt;
  Vec3 n = Vec3::Zero();
  n[axis] = 1.0;
  const Vec3 hit = origin + t * dir;
  const int ia = axis == 0 ? 1 : 0;
  const int ib = axis == 2 ? 1 : 2;
  return Hit{t, n, hit[ia], hit[ib], 0};
}

inline double smooth_checker(double a, double b, double period) {
  const double s = std::sin(std::numbers::pi * a / period) * std::sin(std::numbers::pi * b / period);
  return 0.55 + 0.35 * s;
}

}  // namespace detail

/// Casts one ray per pixel and keeps the nearest hit with positive depth.
/// Depth is the camera-frame z of the hit; normals are camera-frame and face
/// the camera; the checker texture is a smooth product of sines so resampling
/// tests are not dominated by edge aliasing.
inline FrameBundle render_view(const Scene& s, const CameraIntrinsics& k, const CameraPose& pose,
                               double max_depth = kDefaultMaxDepth) {
  s.validate();
  k.validate();
  FrameBundle out;
  out.intrinsics = k;
  out.gravity = pose.rotation * s.gravity_world;
  out.rgb = RgbImage(k.width, k.height, false);
  out.depth = DepthMap(k.width, k.height, max_depth);
  out.normals = NormalMap(k.width, k.height);

  const Mat3& r = pose.rotation.matrix();
  const Mat3 rt = r.transpose();
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Vec3 ray_cam = k.back_project(Pixel{static_cast<double>(x), static_cast<double>(y)});
      const Vec3 dir = rt * ray_cam;
      detail::Hit best;
      for (std::size_t i = 0; i < s.primitives.size(); ++i) {
        const auto hit = std::visit([&](const auto& shape) { return detail::intersect(shape, pose.position, dir); },
                                    s.primitives[i].shape);
        if (hit && hit->t < best.t) {
          best = *hit;
          best.primitive = i;
        }
      }
      if (!std::isfinite(best.t)) continue;

      const Primitive& prim = s.primitives[best.primitive];
      const double albedo = detail::smooth_checker(best.a, best.b, prim.checker_period);
      out.rgb.set(x, y, to_rgb8({255.0 * albedo * prim.tint[0], 255.0 * albedo * prim.tint[1],
                                 255.0 * albedo * prim.tint[2]}));

      // ray_cam has unit z, so the ray parameter is the camera-frame depth.
      // Geometry beyond max_depth is out of sensor range: invalid depth and normal.
      out.depth.set(x, y, best.t);
      if (!out.depth.valid(x, y)) continue;
      Vec3 n_cam = r * best.normal;
      if (n_cam.dot(ray_cam) > 0.0) n_cam = -n_cam;
      out.normals.set(x, y, n_cam);
    }
  }
  return out;
}

/// Floor, two walls and a box around a camera at the origin, 1.4 m above the floor.
inline Scene reference_scene() {
  Scene s;
  s.gravity_world = UnitVector3(0.0, 1.0, 0.0);
  s.primitives.push_back({PlanePrimitive{Vec3(0.0, 1.4, 0.0), UnitVector3(0.0, -1.0, 0.0), 6.0}, 0.5, {0.9, 0.8, 0.6}});
  s.primitives.push_back({PlanePrimitive{Vec3(0.0, 0.0, 3.5), UnitVector3(0.0, 0.0, -1.0), 6.0}, 0.5, {0.7, 0.8, 0.9}});
  s.primitives.push_back({PlanePrimitive{Vec3(2.2, 0.0, 0.0), UnitVector3(-1.0, 0.0, 0.0), 6.0}, 0.5, {0.8, 0.9, 0.7}});
  s.primitives.push_back({BoxPrimitive{Vec3(-0.7, 0.9, 1.6), Vec3(0.1, 1.4, 2.3)}, 0.25, {0.9, 0.5, 0.4}});
  return s;
}

/// Renders the reference scene from the origin at each tilt.
inline std::vector<FrameBundle> standard_tilt_suite(const CameraIntrinsics& k, std::span<const double> angles_deg,
                                                    TiltAxis axis, double max_depth = kDefaultMaxDepth) {
  const Scene scene = reference_scene();
  std::vector<FrameBundle> frames;
  frames.reserve(angles_deg.size());
  for (double angle : angles_deg) {
    if (!std::isfinite(angle)) throw InvalidArgument("standard_tilt_suite: non-finite angle");
    frames.push_back(render_view(scene, k, CameraPose{tilt_rotation(angle, axis), Vec3::Zero()}, max_depth));
  }
  return frames;
}

}  // namespace msr
