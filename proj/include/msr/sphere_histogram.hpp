#pragma once

// Angular histograms of surface normals over a fixed spherical binning,
// KL divergence between them, and KL-driven rotation refinement.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msr/geometry.hpp"
#include "msr/raster.hpp"

namespace msr {

/// Laplace smoothing added to every bin before evaluating KL divergence.
inline constexpr double kDefaultKlSmoothing = 1e-6;

/// Spherical binning: each direction falls into the bin whose center has the
/// largest dot product with it (lowest index on ties). Lookups go through a
/// cube-map table of candidate bins; the table is conservative so results are
/// identical to a full argmax.
class BinningScheme {
 public:
  BinningScheme(std::string id, std::vector<UnitVector3> centers) : id_(std::move(id)), centers_(std::move(centers)) {
    if (centers_.empty()) throw InvalidArgument("BinningScheme: no bins");
    build_lookup();
  }

  /// Centroids of a subdivided icosahedron (20 * 4^level bins). Cached per level.
  static std::shared_ptr<const BinningScheme> icosphere(int level);

  const std::string& id() const { return id_; }
  std::size_t size() const { return centers_.size(); }
  const std::vector<UnitVector3>& centers() const { return centers_; }

  std::size_t nearest_bin(const Vec3& n) const {
    const auto [lo, hi] = candidate_range(n);
    std::size_t best = candidates_[lo];
    double best_dot = centers_[best].vec().dot(n);
    for (std::uint32_t k = lo + 1; k < hi; ++k) {
      const std::size_t b = candidates_[k];
      const double d = centers_[b].vec().dot(n);
      if (d > best_dot) {
        best_dot = d;
        best = b;
      }
    }
    return best;
  }

  /// Mean angle from each bin center to its nearest neighbouring center, degrees.
  double angular_resolution_deg() const {
    if (centers_.size() < 2) return 180.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      double best = std::numbers::pi;
      for (std::size_t j = 0; j < centers_.size(); ++j) {
        if (i != j) best = std::min(best, angle_between(centers_[i], centers_[j]));
      }
      sum += best;
    }
    return rad2deg(sum / static_cast<double>(centers_.size()));
  }

 private:
  static constexpr int kCubeRes = 32;

  // Cube face in [0, 6) and face coordinates (a, b) in [-1, 1].
  static int face_coords(const Vec3& d, double& a, double& b) {
    const Vec3 ad = d.cwiseAbs();
    int axis = 0;
    if (ad.y() > ad[axis]) axis = 1;
    if (ad.z() > ad[axis]) axis = 2;
    const double m = ad[axis];
    const int ia = axis == 0 ? 1 : 0;
    const int ib = axis == 2 ? 1 : 2;
    a = d[ia] / m;
    b = d[ib] / m;
    return 2 * axis + (d[axis] < 0.0 ? 1 : 0);
  }

  static Vec3 face_point(int face, double a, double b) {
    const int axis = face / 2;
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    const int ia = axis == 0 ? 1 : 0;
    const int ib = axis == 2 ? 1 : 2;
    Vec3 v;
    v[axis] = sign;
    v[ia] = a;
    v[ib] = b;
    return v.normalized();
  }

  static int cell_of(double t) {
    const int i = static_cast<int>(std::floor((t + 1.0) * 0.5 * kCubeRes));
    return std::clamp(i, 0, kCubeRes - 1);
  }

  std::pair<std::uint32_t, std::uint32_t> candidate_range(const Vec3& n) const {
    double a = 0.0;
    double b = 0.0;
    const int face = face_coords(n, a, b);
    const std::size_t cell = (static_cast<std::size_t>(face) * kCubeRes + cell_of(b)) * kCubeRes + cell_of(a);
    return {offsets_[cell], offsets_[cell + 1]};
  }

  void build_lookup() {
    const double step = 2.0 / kCubeRes;
    offsets_.assign(6 * kCubeRes * kCubeRes + 1, 0);
    std::vector<double> angles(centers_.size());
    std::size_t cell = 0;
    for (int face = 0; face < 6; ++face) {
      for (int j = 0; j < kCubeRes; ++j) {
        for (int i = 0; i < kCubeRes; ++i, ++cell) {
          const double a0 = -1.0 + i * step;
          const double b0 = -1.0 + j * step;
          const Vec3 c = face_point(face, a0 + 0.5 * step, b0 + 0.5 * step);
          double radius = 0.0;
          for (int corner = 0; corner < 4; ++corner) {
            const Vec3 p = face_point(face, a0 + (corner & 1) * step, b0 + (corner >> 1) * step);
            radius = std::max(radius, angle_between(c, p));
          }
          double nearest = std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < centers_.size(); ++k) {
            angles[k] = angle_between(c, centers_[k].vec());
            nearest = std::min(nearest, angles[k]);
          }
          const double bound = nearest + 2.0 * radius + 1e-7;
          for (std::size_t k = 0; k < centers_.size(); ++k) {
            if (angles[k] <= bound) candidates_.push_back(static_cast<std::uint32_t>(k));
          }
          offsets_[cell + 1] = static_cast<std::uint32_t>(candidates_.size());
        }
      }
    }
  }

  std::string id_;
  std::vector<UnitVector3> centers_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> candidates_;
};

namespace detail {

inline std::vector<UnitVector3> icosphere_face_centroids(int level) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::array<Vec3, 12> verts = {
      Vec3(-1, phi, 0), Vec3(1, phi, 0), Vec3(-1, -phi, 0), Vec3(1, -phi, 0),
      Vec3(0, -1, phi), Vec3(0, 1, phi), Vec3(0, -1, -phi), Vec3(0, 1, -phi),
      Vec3(phi, 0, -1), Vec3(phi, 0, 1), Vec3(-phi, 0, -1), Vec3(-phi, 0, 1)};
  constexpr int faces[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  using Tri = std::array<Vec3, 3>;
  std::vector<Tri> tris;
  for (const auto& f : faces) {
    tris.push_back({verts[f[0]].normalized(), verts[f[1]].normalized(), verts[f[2]].normalized()});
  }
  for (int l = 0; l < level; ++l) {
    std::vector<Tri> next;
    next.reserve(tris.size() * 4);
    for (const auto& [a, b, c] : tris) {
      const Vec3 ab = (a + b).normalized();
      const Vec3 bc = (b + c).normalized();
      const Vec3 ca = (c + a).normalized();
      next.push_back({a, ab, ca});
      next.push_back({ab, b, bc});
      next.push_back({ca, bc, c});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  std::vector<UnitVector3> centers;
  centers.reserve(tris.size());
  for (const auto& [a, b, c] : tris) centers.emplace_back(a + b + c);
  return centers;
}

/// KL(p || q) in nats after adding `smoothing` to every bin and renormalizing.
inline double kl_raw(std::span<const double> p, std::span<const double> q, double smoothing) {
  const double bins = static_cast<double>(p.size());
  double psum = 0.0;
  double qsum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    psum += p[i];
    qsum += q[i];
  }
  const double pz = psum + bins * smoothing;
  const double qz = qsum + bins * smoothing;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double ps = (p[i] + smoothing) / pz;
    if (ps <= 0.0) continue;
    const double qs = (q[i] + smoothing) / qz;
    if (qs <= 0.0) return std::numeric_limits<double>::infinity();
    kl += ps * std::log(ps / qs);
  }
  return std::max(kl, 0.0);
}

}  // namespace detail

inline std::shared_ptr<const BinningScheme> BinningScheme::icosphere(int level) {
  if (level < 0 || level > 6) throw InvalidArgument("BinningScheme::icosphere: level must be in [0, 6]");
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const BinningScheme>> cache;
  const std::lock_guard lock(mutex);
  auto& slot = cache[level];
  if (!slot) {
    slot = std::make_shared<const BinningScheme>("icosphere-" + std::to_string(level),
                                                 detail::icosphere_face_centroids(level));
  }
  return slot;
}

/// The scheme used when none is given: twice-subdivided icosahedron, 320 bins.
inline std::shared_ptr<const BinningScheme> default_binning() { return BinningScheme::icosphere(2); }

/// Normalized distribution of directions over the bins of a scheme.
class SphereHistogram {
 public:
  /// Normalizes `mass` to sum 1. Throws on size mismatch, negative entries or zero total.
  SphereHistogram(std::shared_ptr<const BinningScheme> scheme, std::vector<double> mass)
      : scheme_(std::move(scheme)), mass_(std::move(mass)) {
    if (!scheme_) throw InvalidArgument("SphereHistogram: null scheme");
    if (mass_.size() != scheme_->size()) throw InvalidArgument("SphereHistogram: mass/bin count mismatch");
    double total = 0.0;
    for (double m : mass_) {
      if (!(m >= 0.0) || !std::isfinite(m)) throw InvalidArgument("SphereHistogram: negative or non-finite mass");
      total += m;
    }
    if (!(total > 0.0)) throw InvalidArgument("SphereHistogram: zero total mass");
    for (double& m : mass_) m /= total;
  }

  const std::string& scheme_id() const { return scheme_->id(); }
  const BinningScheme& scheme() const { return *scheme_; }
  const std::shared_ptr<const BinningScheme>& scheme_ptr() const { return scheme_; }
  const std::vector<UnitVector3>& bin_centers() const { return scheme_->centers(); }

  std::size_t size() const { return mass_.size(); }
  double operator[](std::size_t i) const { return mass_[i]; }
  std::span<const double> mass() const { return mass_; }

 private:
  std::shared_ptr<const BinningScheme> scheme_;
  std::vector<double> mass_;
};

/// Surface normals of the valid pixels of one frame.
struct NormalSample {
  std::vector<UnitVector3> normals;
  std::string source_id;
};

inline NormalSample sample_from_normal_map(const NormalMap& map, std::string source_id = {}) {
  NormalSample s;
  s.source_id = std::move(source_id);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.valid(x, y)) s.normals.emplace_back(map.at(x, y));
    }
  }
  return s;
}

inline SphereHistogram build_histogram(const NormalSample& s,
                                       std::shared_ptr<const BinningScheme> scheme = default_binning()) {
  if (s.normals.empty()) throw EmptySample("build_histogram: no normals in sample '" + s.source_id + "'");
  std::vector<double> mass(scheme->size(), 0.0);
  for (const auto& n : s.normals) mass[scheme->nearest_bin(n.vec())] += 1.0;
  return SphereHistogram(std::move(scheme), std::move(mass));
}

/// Mean of per-frame histograms (the per-cluster distribution Q_i).
inline SphereHistogram cluster_distribution(std::span<const NormalSample> samples,
                                            std::shared_ptr<const BinningScheme> scheme = default_binning()) {
  if (samples.empty()) throw EmptySample("cluster_distribution: no samples");
  std::vector<double> mass(scheme->size(), 0.0);
  for (const auto& s : samples) {
    const SphereHistogram h = build_histogram(s, scheme);
    for (std::size_t i = 0; i < mass.size(); ++i) mass[i] += h[i];
  }
  for (double& m : mass) m /= static_cast<double>(samples.size());
  return SphereHistogram(std::move(scheme), std::move(mass));
}

/// D_KL(p || q) in nats with per-bin Laplace smoothing. Pass smoothing = 0 for the raw divergence.
inline double kl_divergence(const SphereHistogram& p, const SphereHistogram& q,
                            double smoothing = kDefaultKlSmoothing) {
  if (p.scheme_id() != q.scheme_id() || p.size() != q.size()) {
    throw SchemeMismatch("kl_divergence: histograms use different binning schemes");
  }
  return detail::kl_raw(p.mass(), q.mass(), smoothing);
}

struct KlRefineOptions {
  std::vector<double> half_widths_deg{15.0, 5.0, 1.5};
  int samples_per_axis = 7;
  double smoothing = kDefaultKlSmoothing;
};

struct KlRefinement {
  Rotation3 rotation;
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

/// Minimizes KL(hist(R n) || q) over rotations near `r_init` with a
/// coarse-to-fine grid over rotation vectors d, candidates exp([d]x) R.
/// A stage moves its center only on strict improvement; among equal
/// objectives the smallest |d| wins, then the lexicographically smallest d.
inline KlRefinement refine_rotation_kl(const NormalSample& s, const SphereHistogram& q, const Rotation3& r_init,
                                       const KlRefineOptions& options = {}) {
  if (s.normals.empty()) throw EmptySample("refine_rotation_kl: no normals in sample '" + s.source_id + "'");
  if (options.samples_per_axis < 1) throw InvalidArgument("refine_rotation_kl: samples_per_axis must be >= 1");

  // Exact duplicates rotate identically; fold them into weights.
  std::map<std::array<double, 3>, double> folded;
  for (const auto& n : s.normals) folded[{n.x(), n.y(), n.z()}] += 1.0;
  std::vector<Vec3> dirs;
  std::vector<double> weights;
  dirs.reserve(folded.size());
  weights.reserve(folded.size());
  const double total = static_cast<double>(s.normals.size());
  for (const auto& [v, w] : folded) {
    dirs.emplace_back(v[0], v[1], v[2]);
    weights.push_back(w / total);
  }

  const BinningScheme& scheme = q.scheme();
  std::vector<double> mass(scheme.size());
  auto objective = [&](const Rotation3& r) {
    std::fill(mass.begin(), mass.end(), 0.0);
    const Mat3& m = r.matrix();
    for (std::size_t i = 0; i < dirs.size(); ++i) mass[scheme.nearest_bin(m * dirs[i])] += weights[i];
    return detail::kl_raw(mass, q.mass(), options.smoothing);
  };

  KlRefinement out;
  out.rotation = r_init;
  out.initial_kl = objective(r_init);
  double current = out.initial_kl;

  const int n = options.samples_per_axis;
  std::vector<double> offsets(static_cast<std::size_t>(n));
  for (double half_width : options.half_widths_deg) {
    const double w = deg2rad(half_width);
    for (int i = 0; i < n; ++i) offsets[i] = n == 1 ? 0.0 : -w + 2.0 * w * i / (n - 1);

    Rotation3 best_rotation = out.rotation;
    double best_kl = current;
    Vec3 best_delta = Vec3::Zero();
    bool improved = false;
    for (double dx : offsets) {
      for (double dy : offsets) {
        for (double dz : offsets) {
          const Vec3 delta(dx, dy, dz);
          const Rotation3 candidate = Rotation3::exp(delta) * out.rotation;
          const double kl = objective(candidate);
          bool take = false;
          if (kl < best_kl) {
            take = true;
          } else if (kl == best_kl && improved) {
            const double dn = delta.squaredNorm();
            const double bn = best_delta.squaredNorm();
            take = dn < bn || (dn == bn && std::lexicographical_compare(delta.data(), delta.data() + 3,
                                                                         best_delta.data(), best_delta.data() + 3));
          }
          if (take) {
            improved = true;
            best_kl = kl;
            best_delta = delta;
            best_rotation = candidate;
          }
        }
      }
    }
    if (improved) {
      out.rotation = best_rotation;
      current = best_kl;
    }
  }
  out.final_kl = current;
  return out;
}

/// e = R* g.
inline UnitVector3 principal_direction(const Rotation3& r_star, const UnitVector3& g) { return r_star * g; }

}  // namespace msr
