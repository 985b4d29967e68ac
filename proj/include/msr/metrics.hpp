#pragma once

// Depth and surface-normal evaluation metrics over mutually valid pixels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "msr/raster.hpp"

namespace msr {

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double log_rmse = 0.0;
  double rmse = 0.0;
  double delta1 = 0.0;  // percent
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t count = 0;
};

struct NormalMetrics {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double rmse_deg = 0.0;
  double pct5 = 0.0;  // percent of pixels with error < 5 deg
  double pct75 = 0.0;
  double pct1125 = 0.0;
  std::size_t count = 0;
};

enum class SqRelDenominator {
  Depth,         // (d^ - d*)^2 / d*
  DepthSquared,  // (d^ - d*)^2 / d*^2
};

struct DepthMetricOptions {
  SqRelDenominator sq_rel_denominator = SqRelDenominator::Depth;
  /// Multiplies the prediction before evaluation (see scale_align).
  double pred_scale = 1.0;
};

namespace detail {

inline void require_same_size(int w0, int h0, int w1, int h1, const char* what) {
  if (w0 != w1 || h0 != h1) throw SizeMismatch(std::string(what) + ": rasters differ in size");
}

}  // namespace detail

/// Threshold accuracies use strict inequality: max(d^/d*, d*/d^) < 1.25^k.
inline DepthMetrics depth_metrics(const DepthMap& gt, const DepthMap& pred, const DepthMetricOptions& options = {}) {
  detail::require_same_size(gt.width(), gt.height(), pred.width(), pred.height(), "depth_metrics");
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double log_sq = 0.0;
  double sq = 0.0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::size_t d3 = 0;
  std::size_t n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.valid(x, y) || !pred.valid(x, y)) continue;
      const double t = gt.at(x, y);
      const double p = options.pred_scale * pred.at(x, y);
      if (!(t > 0.0) || !(p > 0.0)) throw NonPositiveValue("depth_metrics: non-positive depth on a valid pixel");
      const double diff = p - t;
      abs_rel += std::abs(diff) / t;
      sq_rel += diff * diff / (options.sq_rel_denominator == SqRelDenominator::Depth ? t : t * t);
      const double ld = std::log(p) - std::log(t);
      log_sq += ld * ld;
      sq += diff * diff;
      const double ratio = std::max(p / t, t / p);
      d1 += ratio < 1.25;
      d2 += ratio < 1.25 * 1.25;
      d3 += ratio < 1.25 * 1.25 * 1.25;
      ++n;
    }
  }
  if (n == 0) throw NoValidPixels("depth_metrics: no mutually valid pixels");
  const double inv = 1.0 / static_cast<double>(n);
  DepthMetrics m;
  m.abs_rel = abs_rel * inv;
  m.sq_rel = sq_rel * inv;
  m.log_rmse = std::sqrt(log_sq * inv);
  m.rmse = std::sqrt(sq * inv);
  m.delta1 = 100.0 * static_cast<double>(d1) * inv;
  m.delta2 = 100.0 * static_cast<double>(d2) * inv;
  m.delta3 = 100.0 * static_cast<double>(d3) * inv;
  m.count = n;
  return m;
}

/// Median of an even count is the mean of the two middle values.
inline NormalMetrics normal_metrics(const NormalMap& gt, const NormalMap& pred) {
  detail::require_same_size(gt.width(), gt.height(), pred.width(), pred.height(), "normal_metrics");
  std::vector<double> errors;
  errors.reserve(gt.mask().size());
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.valid(x, y) || !pred.valid(x, y)) continue;
      const double c = std::clamp(gt.at(x, y).dot(pred.at(x, y)), -1.0, 1.0);
      errors.push_back(rad2deg(std::acos(c)));
    }
  }
  if (errors.empty()) throw NoValidPixels("normal_metrics: no mutually valid pixels");

  NormalMetrics m;
  m.count = errors.size();
  const double inv = 1.0 / static_cast<double>(errors.size());
  double sum = 0.0;
  double sq = 0.0;
  std::size_t p5 = 0;
  std::size_t p75 = 0;
  std::size_t p1125 = 0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
    p5 += e < 5.0;
    p75 += e < 7.5;
    p1125 += e < 11.25;
  }
  m.mean_deg = sum * inv;
  m.rmse_deg = std::sqrt(sq * inv);
  m.pct5 = 100.0 * static_cast<double>(p5) * inv;
  m.pct75 = 100.0 * static_cast<double>(p75) * inv;
  m.pct1125 = 100.0 * static_cast<double>(p1125) * inv;

  const std::size_t mid = errors.size() / 2;
  std::nth_element(errors.begin(), errors.begin() + mid, errors.end());
  const double upper = errors[mid];
  if (errors.size() % 2 == 1) {
    m.median_deg = upper;
  } else {
    const double lower = *std::max_element(errors.begin(), errors.begin() + mid);
    m.median_deg = 0.5 * (lower + upper);
  }
  return m;
}

/// Least-squares scale s = sum(d^ d*) / sum(d^^2) over mutually valid pixels.
inline double scale_align(const DepthMap& gt, const DepthMap& pred) {
  detail::require_same_size(gt.width(), gt.height(), pred.width(), pred.height(), "scale_align");
  double num = 0.0;
  double den = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.valid(x, y) || !pred.valid(x, y)) continue;
      num += pred.at(x, y) * gt.at(x, y);
      den += pred.at(x, y) * pred.at(x, y);
      ++n;
    }
  }
  if (n == 0) throw NoValidPixels("scale_align: no mutually valid pixels");
  if (!(den > 0.0)) throw DegenerateInput("scale_align: prediction is identically zero");
  return num / den;
}

}  // namespace msr
