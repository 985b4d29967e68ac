#pragma once

// Whole-frame rectification by a rotation-induced homography, and the
// inverse geometry transforms that bring rectified predictions back.
//
// For a camera rotated by R, the pixel x of the original image lands at
// W(x) = warp_point(x, K, R). Depth transforms as d' = (R K^-1 x~)_z d and
// normals as n' = R n. The canvas and intrinsics never change; content that
// leaves the frustum is marked invalid.

#include <optional>

#include "msr/geometry.hpp"
#include "msr/raster.hpp"

namespace msr {

struct WarpOptions {
  /// Bilinear interpolation of normals followed by renormalization. Nearest by default.
  bool bilinear_normals = false;
};

namespace detail {

inline std::optional<Vec3> sample_normal_bilinear(const NormalMap& map, const Pixel& p) {
  const double fu = std::floor(p.u);
  const double fv = std::floor(p.v);
  if (!(fu >= 0.0) || !(fv >= 0.0) || fu > map.width() - 1 || fv > map.height() - 1) return std::nullopt;
  const int x0 = static_cast<int>(fu);
  const int y0 = static_cast<int>(fv);
  const int x1 = std::min(x0 + 1, map.width() - 1);
  const int y1 = std::min(y0 + 1, map.height() - 1);
  if (!map.valid(x0, y0) || !map.valid(x1, y0) || !map.valid(x0, y1) || !map.valid(x1, y1)) return std::nullopt;
  const double ax = p.u - fu;
  const double ay = p.v - fv;
  const Vec3 n = (1 - ay) * ((1 - ax) * map.at(x0, y0) + ax * map.at(x1, y0)) +
                 ay * ((1 - ax) * map.at(x0, y1) + ax * map.at(x1, y1));
  if (n.norm() <= kEpsilon) return std::nullopt;
  return n.normalized();
}

}  // namespace detail

/// Re-renders a bundle as seen by the camera rotated by `r` (same center, same K).
inline FrameBundle warp_bundle(const FrameBundle& b, const Rotation3& r, const WarpOptions& options = {}) {
  b.validate();
  const CameraIntrinsics& k = b.intrinsics;
  const int w = k.width;
  const int h = k.height;
  const Rotation3 r_inv = r.inverse();

  FrameBundle out;
  out.intrinsics = k;
  out.gravity = r * b.gravity;
  out.rgb = RgbImage(w, h, false);
  out.depth = DepthMap(w, h, b.depth.max_depth());
  out.normals = NormalMap(w, h);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto src = warp_point(Pixel{static_cast<double>(x), static_cast<double>(y)}, k, r_inv);
      if (!src) continue;

      if (const auto c = b.rgb.sample_bilinear(*src)) out.rgb.set(x, y, to_rgb8(*c));

      const auto nearest = nearest_index(*src, w, h);
      if (nearest) {
        const auto [sx, sy] = *nearest;
        if (b.depth.valid(sx, sy)) {
          out.depth.set(x, y, b.depth.at(sx, sy) * ray_z_factor(*src, k, r));
        }
      }

      if (options.bilinear_normals) {
        if (const auto n = detail::sample_normal_bilinear(b.normals, *src)) out.normals.set(x, y, r * *n);
      } else if (nearest) {
        const auto [sx, sy] = *nearest;
        if (b.normals.valid(sx, sy)) out.normals.set(x, y, r * b.normals.at(sx, sy));
      }
    }
  }
  return out;
}

/// Brings a depth prediction made on the rectified frame back to the original
/// frame: result(x) = pred_up(W(x)) / (R K^-1 x~)_z.
inline DepthMap unwarp_depth_prediction(const DepthMap& pred_up, const CameraIntrinsics& k, const Rotation3& r) {
  if (pred_up.width() != k.width || pred_up.height() != k.height) {
    throw SizeMismatch("unwarp_depth_prediction: prediction does not match intrinsics");
  }
  DepthMap out(k.width, k.height, pred_up.max_depth());
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Pixel p{static_cast<double>(x), static_cast<double>(y)};
      const double factor = ray_z_factor(p, k, r);
      if (factor <= kEpsilon) continue;
      const auto up = warp_point(p, k, r);
      if (!up) continue;
      const auto idx = nearest_index(*up, k.width, k.height);
      if (!idx || !pred_up.valid((*idx)[0], (*idx)[1])) continue;
      out.set(x, y, pred_up.at((*idx)[0], (*idx)[1]) / factor);
    }
  }
  return out;
}

/// result(x) = R^T pred_up(W(x)).
inline NormalMap unwarp_normal_prediction(const NormalMap& pred_up, const CameraIntrinsics& k, const Rotation3& r) {
  if (pred_up.width() != k.width || pred_up.height() != k.height) {
    throw SizeMismatch("unwarp_normal_prediction: prediction does not match intrinsics");
  }
  const Rotation3 r_inv = r.inverse();
  NormalMap out(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const auto up = warp_point(Pixel{static_cast<double>(x), static_cast<double>(y)}, k, r);
      if (!up) continue;
      const auto idx = nearest_index(*up, k.width, k.height);
      if (!idx || !pred_up.valid((*idx)[0], (*idx)[1])) continue;
      out.set(x, y, r_inv * pred_up.at((*idx)[0], (*idx)[1]));
    }
  }
  return out;
}

}  // namespace msr
