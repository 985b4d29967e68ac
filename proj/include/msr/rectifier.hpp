#pragma once

// Multimodal spatial rectification: reference directions clustered from
// training gravities, nearest-mode assignment, the warp -> predict -> unwarp
// mixture around a pluggable geometry predictor, and the training losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "msr/geometry.hpp"
#include "msr/kmedoids.hpp"
#include "msr/raster.hpp"
#include "msr/sphere_histogram.hpp"
#include "msr/synthetic.hpp"
#include "msr/warp.hpp"

namespace msr {

/// Minimum angular separation between two reference directions.
inline constexpr double kMinReferenceSeparationDeg = 1.0;

/// The reference directions r_i, plus the clustering parameters that produced
/// them and (optionally) each mode's normal distribution Q_i.
class ReferenceSet {
 public:
  explicit ReferenceSet(std::vector<UnitVector3> directions, double delta = 0.0, std::uint64_t seed = 0,
                        double deviation = 0.0)
      : directions_(std::move(directions)), delta_(delta), seed_(seed), deviation_(deviation) {
    if (directions_.empty()) throw EmptyInput("ReferenceSet: no directions");
    for (std::size_t i = 0; i < directions_.size(); ++i) {
      for (std::size_t j = i + 1; j < directions_.size(); ++j) {
        if (rad2deg(angle_between(directions_[i], directions_[j])) <= kMinReferenceSeparationDeg) {
          throw InvalidArgument("ReferenceSet: directions " + std::to_string(i) + " and " + std::to_string(j) +
                                " are closer than 1 degree");
        }
      }
    }
  }

  std::size_t size() const { return directions_.size(); }
  const UnitVector3& operator[](std::size_t i) const { return directions_[i]; }
  const std::vector<UnitVector3>& directions() const { return directions_; }

  double delta() const { return delta_; }
  std::uint64_t seed() const { return seed_; }
  /// Mean squared chordal distance of the clustered gravities to their medoid.
  double deviation() const { return deviation_; }

  const std::vector<std::optional<SphereHistogram>>& per_mode_q() const { return per_mode_q_; }
  void set_per_mode_q(std::vector<std::optional<SphereHistogram>> q) {
    if (!q.empty() && q.size() != directions_.size()) {
      throw InvalidArgument("ReferenceSet: per-mode distributions must match the number of modes");
    }
    per_mode_q_ = std::move(q);
  }

 private:
  std::vector<UnitVector3> directions_;
  double delta_ = 0.0;
  std::uint64_t seed_ = 0;
  double deviation_ = 0.0;
  std::vector<std::optional<SphereHistogram>> per_mode_q_;
};

inline double squared_chord(const UnitVector3& a, const UnitVector3& b) { return (a.vec() - b.vec()).squaredNorm(); }

/// Increases K from 1 until PAM on the gravities reaches a mean squared
/// deviation (1/N) sum_i sum_{j in C_i} |g_j - r_i|^2 <= delta.
/// Small problems are solved exactly by enumerating medoid subsets; larger
/// ones use PAM, whose starting point the seed picks.
inline ReferenceSet cluster_references(std::span<const UnitVector3> gravities, double delta, std::uint64_t seed = 0) {
  if (gravities.empty()) throw EmptyInput("cluster_references: no gravity directions");
  if (!(delta > 0.0)) throw InvalidArgument("cluster_references: delta must be positive");
  const std::size_t n = gravities.size();
  std::mt19937_64 rng(seed);
  const std::size_t start = static_cast<std::size_t>(rng() % n);
  auto dist = [&](std::size_t i, std::size_t j) { return squared_chord(gravities[i], gravities[j]); };

  for (std::size_t k = 1;; ++k) {
    const KMedoidsResult res = exact_kmedoids_affordable(n, k) ? exact_kmedoids(n, k, dist) : pam(n, k, start, dist);
    const double deviation = res.total_cost / static_cast<double>(n);
    if (deviation <= delta || k == n) {
      std::vector<UnitVector3> dirs;
      dirs.reserve(k);
      for (std::size_t m : res.medoids) dirs.push_back(gravities[m]);
      return ReferenceSet(std::move(dirs), delta, seed, deviation);
    }
  }
}

/// Mixture weights b_i over modes; `chosen` is the argmax (lowest index on ties).
struct ModeAssignment {
  std::vector<double> weights;
  std::size_t chosen = 0;

  static ModeAssignment one_hot(std::size_t modes, std::size_t index) {
    if (index >= modes) throw InvalidArgument("ModeAssignment: index out of range");
    ModeAssignment a;
    a.weights.assign(modes, 0.0);
    a.weights[index] = 1.0;
    a.chosen = index;
    return a;
  }

  static ModeAssignment soft(std::vector<double> weights) {
    double total = 0.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
        throw InvalidArgument("ModeAssignment: weights must be finite and non-negative");
      }
      total += weights[i];
      if (weights[i] > weights[best]) best = i;
    }
    if (!(total > 0.0)) throw InvalidArgument("ModeAssignment: weights sum to zero");
    return ModeAssignment{std::move(weights), best};
  }
};

/// One-hot weight on the reference closest to g (lowest index on ties).
inline ModeAssignment assign_mode(const UnitVector3& g, const ReferenceSet& refs) {
  std::size_t best = 0;
  double best_d = squared_chord(g, refs[0]);
  for (std::size_t i = 1; i < refs.size(); ++i) {
    const double d = squared_chord(g, refs[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return ModeAssignment::one_hot(refs.size(), best);
}

enum class GeometryKind { Depth, Normal };

using GeometryMap = std::variant<DepthMap, NormalMap>;

inline GeometryKind kind_of(const GeometryMap& m) {
  return std::holds_alternative<DepthMap>(m) ? GeometryKind::Depth : GeometryKind::Normal;
}

/// What a predictor is told besides the rectified frame.
struct PredictionContext {
  Rotation3 rectification;  // rotation that produced the rectified frame
  std::size_t mode = 0;
};

/// Per-pixel geometry from a (rectified) image. Output matches the input size.
class GeometryPredictor {
 public:
  virtual ~GeometryPredictor() = default;
  virtual GeometryKind kind() const = 0;
  virtual GeometryMap predict(const FrameBundle& rectified, const PredictionContext& context) const = 0;
};

/// Ground truth for the rectified pose, rendered from a synthetic scene.
class OraclePredictor final : public GeometryPredictor {
 public:
  OraclePredictor(Scene scene, CameraPose tilted_pose, GeometryKind kind, double max_depth = kDefaultMaxDepth)
      : scene_(std::move(scene)), pose_(std::move(tilted_pose)), kind_(kind), max_depth_(max_depth) {}

  GeometryKind kind() const override { return kind_; }

  GeometryMap predict(const FrameBundle& rectified, const PredictionContext& context) const override {
    const CameraPose pose{context.rectification * pose_.rotation, pose_.position};
    FrameBundle truth = render_view(scene_, rectified.intrinsics, pose, max_depth_);
    if (kind_ == GeometryKind::Depth) return std::move(truth.depth);
    return std::move(truth.normals);
  }

 private:
  Scene scene_;
  CameraPose pose_;
  GeometryKind kind_;
  double max_depth_;
};

/// Uniform depth or a single normal everywhere; for plumbing tests.
class ConstantPredictor final : public GeometryPredictor {
 public:
  explicit ConstantPredictor(double depth) : kind_(GeometryKind::Depth), depth_(depth) {}
  explicit ConstantPredictor(const UnitVector3& normal) : kind_(GeometryKind::Normal), normal_(normal) {}

  GeometryKind kind() const override { return kind_; }

  GeometryMap predict(const FrameBundle& rectified, const PredictionContext&) const override {
    const int w = rectified.width();
    const int h = rectified.height();
    if (kind_ == GeometryKind::Depth) {
      DepthMap d(w, h, rectified.depth.max_depth());
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d.set(x, y, depth_);
      return d;
    }
    NormalMap n(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) n.set(x, y, normal_.vec());
    return n;
  }

 private:
  GeometryKind kind_;
  double depth_ = 1.0;
  UnitVector3 normal_{0.0, 0.0, -1.0};
};

struct RectifyOptions {
  /// Principal direction e for the chosen mode; without it the chosen mode
  /// rotates g straight onto its reference direction.
  std::optional<UnitVector3> principal;
  /// Mixture weights; default is one-hot on the nearest reference.
  std::optional<ModeAssignment> weights;
  WarpOptions warp;
};

struct RectifyResult {
  GeometryMap prediction;
  ModeAssignment assignment;
  Rotation3 rotation;                    // rectifying rotation of the chosen mode
  double rectified_valid_fraction = 0.0;  // depth validity of the chosen mode's warped frame
};

namespace detail {

inline bool any_valid(const GeometryMap& m) {
  return std::visit([](const auto& map) { return count_valid(map.mask()) > 0; }, m);
}

inline GeometryMap mix_predictions(const std::vector<GeometryMap>& preds, const std::vector<double>& weights,
                                   int w, int h) {
  if (kind_of(preds.front()) == GeometryKind::Depth) {
    DepthMap out(w, h, std::get<DepthMap>(preds.front()).max_depth());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          const auto& d = std::get<DepthMap>(preds[i]);
          if (!d.valid(x, y)) continue;
          num += weights[i] * d.at(x, y);
          den += weights[i];
        }
        if (den > 0.0) out.set(x, y, num / den);
      }
    }
    return out;
  }
  NormalMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Vec3 sum = Vec3::Zero();
      bool any = false;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& n = std::get<NormalMap>(preds[i]);
        if (!n.valid(x, y)) continue;
        sum += weights[i] * n.at(x, y);
        any = true;
      }
      // A zero vector sum leaves the pixel invalid.
      if (any) out.set(x, y, sum);
    }
  }
  return out;
}

}  // namespace detail

/// Warps the frame to each weighted mode, predicts on the rectified image and
/// maps the prediction back:
///   Phi(x) = sum_i b_i h_i^-1(Phi_i(W_i(x))) / sum_i b_i
/// over modes whose prediction is valid at x. `predictors` holds either one
/// predictor shared by all modes or one per mode.
inline RectifyResult rectify_predict(const FrameBundle& b, const ReferenceSet& refs,
                                     std::span<const GeometryPredictor* const> predictors, const UnitVector3& g_hat,
                                     const RectifyOptions& options = {}) {
  b.validate();
  if (predictors.empty() || (predictors.size() != 1 && predictors.size() != refs.size())) {
    throw InvalidArgument("rectify_predict: need one shared predictor or one per mode");
  }
  for (const auto* p : predictors) {
    if (p == nullptr) throw InvalidArgument("rectify_predict: null predictor");
    if (p->kind() != predictors.front()->kind()) throw KindMismatch("rectify_predict: predictors disagree on kind");
  }

  RectifyResult result;
  result.assignment = options.weights ? *options.weights : assign_mode(g_hat, refs);
  if (result.assignment.weights.size() != refs.size()) {
    throw InvalidArgument("rectify_predict: weight count does not match the reference set");
  }
  const std::size_t chosen = result.assignment.chosen;

  std::vector<GeometryMap> preds;
  std::vector<double> weights;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double wi = result.assignment.weights[i];
    if (wi <= 0.0) continue;
    const Rotation3 r = (i == chosen && options.principal) ? rotation_from_gravity_principal(g_hat, *options.principal)
                                                            : rotation_between(g_hat, refs[i]);
    const FrameBundle warped = warp_bundle(b, r, options.warp);
    if (i == chosen) {
      result.rotation = r;
      result.rectified_valid_fraction = warped.depth.valid_fraction();
    }
    const GeometryPredictor& predictor = *predictors[predictors.size() == 1 ? 0 : i];
    GeometryMap up = predictor.predict(warped, PredictionContext{r, i});
    if (kind_of(up) != predictor.kind()) throw KindMismatch("rectify_predict: predictor returned the wrong kind");
    GeometryMap back = std::visit(
        [&](const auto& map) -> GeometryMap {
          using T = std::decay_t<decltype(map)>;
          if (map.width() != b.width() || map.height() != b.height()) {
            throw SizeMismatch("rectify_predict: prediction size differs from the input");
          }
          if constexpr (std::is_same_v<T, DepthMap>) {
            return unwarp_depth_prediction(map, b.intrinsics, r);
          } else {
            return unwarp_normal_prediction(map, b.intrinsics, r);
          }
        },
        up);
    if (!detail::any_valid(back)) continue;
    preds.push_back(std::move(back));
    weights.push_back(wi);
  }
  if (preds.empty()) throw AllModesInvalid("rectify_predict: every weighted mode produced an empty prediction");

  if (preds.size() == 1) {
    result.prediction = std::move(preds.front());
  } else {
    result.prediction = detail::mix_predictions(preds, weights, b.width(), b.height());
  }
  return result;
}

inline RectifyResult rectify_predict(const FrameBundle& b, const ReferenceSet& refs, const GeometryPredictor& predictor,
                                     const UnitVector3& g_hat, const RectifyOptions& options = {}) {
  const GeometryPredictor* const one[] = {&predictor};
  return rectify_predict(b, refs, std::span<const GeometryPredictor* const>(one), g_hat, options);
}

/// Per-mode normal distributions Q_i: the mean histogram of the frames whose
/// gravity is nearest to r_i. Modes without frames get no distribution.
inline std::vector<std::optional<SphereHistogram>> mode_distributions(
    std::span<const NormalSample> samples, std::span<const UnitVector3> gravities, const ReferenceSet& refs,
    std::shared_ptr<const BinningScheme> scheme = default_binning()) {
  if (samples.size() != gravities.size()) throw InvalidArgument("mode_distributions: samples and gravities differ");
  std::vector<std::vector<NormalSample>> members(refs.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j].normals.empty()) continue;
    members[assign_mode(gravities[j], refs).chosen].push_back(samples[j]);
  }
  std::vector<std::optional<SphereHistogram>> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!members[i].empty()) out[i] = cluster_distribution(members[i], scheme);
  }
  return out;
}

struct PrincipalEstimate {
  Rotation3 rotation;  // R*
  UnitVector3 direction;  // e = R* g
  std::size_t mode = 0;
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

/// R* = argmin_R KL(hist(R n) || Q_i), started from the rotation taking g onto
/// r_i; e = R* g. Falls back to the initial rotation when mode i has no Q_i.
inline PrincipalEstimate estimate_principal(const NormalSample& normals, const UnitVector3& g, const ReferenceSet& refs,
                                            const KlRefineOptions& options = {}) {
  PrincipalEstimate est;
  est.mode = assign_mode(g, refs).chosen;
  const Rotation3 init = rotation_between(g, refs[est.mode]);
  est.rotation = init;
  const auto& q = refs.per_mode_q();
  if (!q.empty() && q[est.mode] && !normals.normals.empty()) {
    const KlRefinement ref = refine_rotation_kl(normals, *q[est.mode], init, options);
    est.rotation = ref.rotation;
    est.initial_kl = ref.initial_kl;
    est.final_kl = ref.final_kl;
  }
  est.direction = principal_direction(est.rotation, g);
  return est;
}

/// acos(g^T g^) + acos(e^T e^), dot products clamped to [-1, 1].
inline double loss_sr(const UnitVector3& g_pred, const UnitVector3& g_gt, const UnitVector3& e_pred,
                      const UnitVector3& e_gt) {
  return std::acos(std::clamp(g_pred.dot(g_gt), -1.0, 1.0)) + std::acos(std::clamp(e_pred.dot(e_gt), -1.0, 1.0));
}

enum class Reduction { Sum, Mean };

/// Sum over mutually valid pixels of |y - y^| (depth) or acos(y^T y^) (normals).
inline double loss_geo(const GeometryMap& y_gt, const GeometryMap& y_pred, Reduction reduction = Reduction::Sum) {
  if (kind_of(y_gt) != kind_of(y_pred)) throw KindMismatch("loss_geo: depth compared with normals");
  double total = 0.0;
  std::size_t n = 0;
  if (const auto* gt = std::get_if<DepthMap>(&y_gt)) {
    const auto& pred = std::get<DepthMap>(y_pred);
    if (gt->width() != pred.width() || gt->height() != pred.height()) throw SizeMismatch("loss_geo: size mismatch");
    for (int y = 0; y < gt->height(); ++y)
      for (int x = 0; x < gt->width(); ++x)
        if (gt->valid(x, y) && pred.valid(x, y)) {
          total += std::abs(gt->at(x, y) - pred.at(x, y));
          ++n;
        }
  } else {
    const auto& g = std::get<NormalMap>(y_gt);
    const auto& pred = std::get<NormalMap>(y_pred);
    if (g.width() != pred.width() || g.height() != pred.height()) throw SizeMismatch("loss_geo: size mismatch");
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x)
        if (g.valid(x, y) && pred.valid(x, y)) {
          total += std::acos(std::clamp(g.at(x, y).dot(pred.at(x, y)), -1.0, 1.0));
          ++n;
        }
  }
  if (reduction == Reduction::Mean) return n == 0 ? 0.0 : total / static_cast<double>(n);
  return total;
}

inline constexpr double kDefaultSrLossWeight = 1.0;

/// L = L_GEO + lambda L_SR.
inline double loss_total(double geo, double sr, double lambda = kDefaultSrLossWeight) {
  if (!(lambda >= 0.0)) throw InvalidArgument("loss_total: lambda must be non-negative");
  return geo + lambda * sr;
}

}  // namespace msr
