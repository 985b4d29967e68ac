#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "msr/metrics.hpp"
#include "test_support.hpp"

using namespace msr;

namespace {

DepthMap depth_row(const std::vector<double>& v) {
  DepthMap d(static_cast<int>(v.size()), 1, 100.0);
  for (std::size_t i = 0; i < v.size(); ++i) d.set(static_cast<int>(i), 0, v[i]);
  return d;
}

NormalMap normal_row(const std::vector<Vec3>& v) {
  NormalMap n(static_cast<int>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) n.set(static_cast<int>(i), 0, v[i]);
  return n;
}

Vec3 tilted_from_z(double deg) { return Vec3(std::sin(deg2rad(deg)), 0.0, std::cos(deg2rad(deg))); }

// Straightforward restatement of the metric formulas over flat arrays.
struct Naive {
  double abs_rel, sq_rel, log_rmse, rmse, d1, d2, d3;
};

Naive naive_depth(const std::vector<double>& t, const std::vector<double>& p, const std::vector<bool>& ok) {
  std::vector<double> tt;
  std::vector<double> pp;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (ok[i]) {
      tt.push_back(t[i]);
      pp.push_back(p[i]);
    }
  }
  const double n = static_cast<double>(tt.size());
  Naive r{0, 0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < tt.size(); ++i) {
    r.abs_rel += std::abs(pp[i] - tt[i]) / tt[i] / n;
    r.sq_rel += std::pow(pp[i] - tt[i], 2) / tt[i] / n;
    r.log_rmse += std::pow(std::log(pp[i] / tt[i]), 2) / n;
    r.rmse += std::pow(pp[i] - tt[i], 2) / n;
    const double q = std::max(pp[i] / tt[i], tt[i] / pp[i]);
    r.d1 += (q < 1.25 ? 100.0 : 0.0) / n;
    r.d2 += (q < std::pow(1.25, 2) ? 100.0 : 0.0) / n;
    r.d3 += (q < std::pow(1.25, 3) ? 100.0 : 0.0) / n;
  }
  r.log_rmse = std::sqrt(r.log_rmse);
  r.rmse = std::sqrt(r.rmse);
  return r;
}

}  // namespace

TEST(DepthMetrics, MatchesNaiveOracle) {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> depth(0.2, 10.0);
  std::uniform_real_distribution<double> noise(0.6, 1.5);
  std::bernoulli_distribution keep(0.85);
  for (int trial = 0; trial < 100; ++trial) {
    DepthMap gt(8, 8, 100.0);
    DepthMap pred(8, 8, 100.0);
    std::vector<double> t(64);
    std::vector<double> p(64);
    std::vector<bool> ok(64);
    for (int i = 0; i < 64; ++i) {
      t[i] = depth(rng);
      p[i] = t[i] * noise(rng);
      const bool a = keep(rng);
      const bool b = keep(rng);
      if (a) gt.set(i % 8, i / 8, t[i]);
      if (b) pred.set(i % 8, i / 8, p[i]);
      ok[i] = a && b;
    }
    const auto m = depth_metrics(gt, pred);
    const auto o = naive_depth(t, p, ok);
    EXPECT_NEAR(m.abs_rel, o.abs_rel, 1e-12);
    EXPECT_NEAR(m.sq_rel, o.sq_rel, 1e-12);
    EXPECT_NEAR(m.log_rmse, o.log_rmse, 1e-12);
    EXPECT_NEAR(m.rmse, o.rmse, 1e-12);
    EXPECT_NEAR(m.delta1, o.d1, 1e-9);
    EXPECT_NEAR(m.delta2, o.d2, 1e-9);
    EXPECT_NEAR(m.delta3, o.d3, 1e-9);
    EXPECT_EQ(m.count, static_cast<std::size_t>(std::count(ok.begin(), ok.end(), true)));
  }
}

TEST(DepthMetrics, WorkedExample) {
  const auto m = depth_metrics(depth_row({1.0, 2.0, 4.0}), depth_row({1.1, 1.8, 4.4}));
  EXPECT_NEAR(m.abs_rel, 0.1, 1e-12);
  EXPECT_NEAR(m.sq_rel, (0.01 / 1.0 + 0.04 / 2.0 + 0.16 / 4.0) / 3.0, 1e-12);
  EXPECT_NEAR(m.sq_rel, 0.023333, 1e-6);
  EXPECT_DOUBLE_EQ(m.delta1, 100.0);
  EXPECT_EQ(m.count, 3u);
}

TEST(DepthMetrics, ThresholdIsStrict) {
  const auto m = depth_metrics(depth_row({1.0, 2.0, 4.0}), depth_row({1.25, 2.5, 5.0}));
  EXPECT_DOUBLE_EQ(m.delta1, 0.0);
  EXPECT_DOUBLE_EQ(m.delta2, 100.0);
}

TEST(DepthMetrics, PerfectPredictionAndInvariances) {
  const DepthMap gt = depth_row({0.5, 1.0, 3.0, 7.0});
  const auto m = depth_metrics(gt, gt);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.delta1, 100.0);

  // swapping prediction and truth leaves symmetric measures unchanged
  const DepthMap pred = depth_row({0.6, 0.9, 3.3, 5.0});
  const auto a = depth_metrics(gt, pred);
  const auto b = depth_metrics(pred, gt);
  EXPECT_NEAR(a.rmse, b.rmse, 1e-15);
  EXPECT_NEAR(a.log_rmse, b.log_rmse, 1e-15);
  EXPECT_EQ(a.delta1, b.delta1);

  // log_rmse is scale invariant when both sides scale together
  const DepthMap gt2 = depth_row({1.0, 2.0, 6.0, 14.0});
  const DepthMap pred2 = depth_row({1.2, 1.8, 6.6, 10.0});
  EXPECT_NEAR(depth_metrics(gt2, pred2).log_rmse, a.log_rmse, 1e-12);
  EXPECT_NEAR(depth_metrics(gt2, pred2).abs_rel, a.abs_rel, 1e-12);
}

TEST(DepthMetrics, SqRelDenominatorOption) {
  DepthMetricOptions o;
  o.sq_rel_denominator = SqRelDenominator::DepthSquared;
  const auto m = depth_metrics(depth_row({1.0, 2.0, 4.0}), depth_row({1.1, 1.8, 4.4}), o);
  EXPECT_NEAR(m.sq_rel, (0.01 / 1.0 + 0.04 / 4.0 + 0.16 / 16.0) / 3.0, 1e-12);
}

TEST(DepthMetrics, Errors) {
  DepthMap empty(3, 1);
  EXPECT_THROW(depth_metrics(empty, depth_row({1, 2, 3})), NoValidPixels);
  EXPECT_THROW(depth_metrics(depth_row({1, 2}), depth_row({1, 2, 3})), SizeMismatch);
  DepthMap raw = depth_row({1, 2, 3});
  raw.set_unchecked(1, 0, -2.0, true);
  EXPECT_THROW(depth_metrics(depth_row({1, 2, 3}), raw), NonPositiveValue);
}

TEST(ScaleAlign, Examples) {
  const DepthMap gt = depth_row({1.0, 2.0, 4.0});
  EXPECT_NEAR(scale_align(gt, depth_row({2.0, 4.0, 8.0})), 0.5, 1e-15);
  const double s = scale_align(gt, depth_row({1.0, 1.5, 3.5}));
  // closed form: sum(p t) / sum(p^2)
  EXPECT_NEAR(s, (1.0 + 3.0 + 14.0) / (1.0 + 2.25 + 12.25), 1e-15);

  DepthMetricOptions o;
  o.pred_scale = scale_align(gt, depth_row({1.0 / 1.2, 2.0 / 1.2, 4.0 / 1.2}));
  EXPECT_NEAR(o.pred_scale, 1.2, 1e-12);
  EXPECT_NEAR(depth_metrics(gt, depth_row({1.0 / 1.2, 2.0 / 1.2, 4.0 / 1.2}), o).abs_rel, 0.0, 1e-12);

  DepthMap zeros(3, 1);
  for (int x = 0; x < 3; ++x) zeros.set_unchecked(x, 0, 0.0, true);
  EXPECT_THROW(scale_align(gt, zeros), DegenerateInput);
  EXPECT_THROW(scale_align(gt, DepthMap(3, 1)), NoValidPixels);
}

TEST(NormalMetrics, ConstantError) {
  std::vector<Vec3> gt(10, Vec3(0, 0, 1));
  std::vector<Vec3> pred(10, tilted_from_z(10.0));
  const auto m = normal_metrics(normal_row(gt), normal_row(pred));
  EXPECT_NEAR(m.mean_deg, 10.0, 1e-9);
  EXPECT_NEAR(m.median_deg, 10.0, 1e-9);
  EXPECT_NEAR(m.rmse_deg, 10.0, 1e-9);
  EXPECT_DOUBLE_EQ(m.pct5, 0.0);
  EXPECT_DOUBLE_EQ(m.pct75, 0.0);
  EXPECT_DOUBLE_EQ(m.pct1125, 100.0);
}

TEST(NormalMetrics, HalfAndHalf) {
  std::vector<Vec3> gt(10, Vec3(0, 0, 1));
  std::vector<Vec3> pred;
  for (int i = 0; i < 5; ++i) pred.push_back(Vec3(0, 0, 1));
  for (int i = 0; i < 5; ++i) pred.push_back(tilted_from_z(20.0));
  const auto m = normal_metrics(normal_row(gt), normal_row(pred));
  EXPECT_NEAR(m.mean_deg, 10.0, 1e-9);
  EXPECT_NEAR(m.median_deg, 10.0, 1e-9);
  EXPECT_NEAR(m.rmse_deg, std::sqrt(200.0), 1e-9);
  EXPECT_NEAR(m.rmse_deg, 14.1421, 1e-4);
  EXPECT_DOUBLE_EQ(m.pct1125, 50.0);
}

TEST(NormalMetrics, MatchesSortedOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + trial % 7;
    std::vector<Vec3> gt;
    std::vector<Vec3> pred;
    std::vector<double> errs;
    for (int i = 0; i < n; ++i) {
      gt.push_back(test::random_unit(rng).vec());
      pred.push_back(test::random_unit(rng).vec());
      errs.push_back(std::acos(std::clamp(gt.back().dot(pred.back()), -1.0, 1.0)) * 180.0 / std::numbers::pi);
    }
    std::sort(errs.begin(), errs.end());
    const double median = n % 2 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
    double mean = 0.0;
    for (double e : errs) mean += e / n;
    const auto m = normal_metrics(normal_row(gt), normal_row(pred));
    EXPECT_NEAR(m.median_deg, median, 1e-9);
    EXPECT_NEAR(m.mean_deg, mean, 1e-9);
  }
}

TEST(NormalMetrics, InvariantUnderCommonRotation) {
  std::mt19937_64 rng(4);
  std::vector<Vec3> gt;
  std::vector<Vec3> pred;
  for (int i = 0; i < 30; ++i) {
    gt.push_back(test::random_unit(rng).vec());
    pred.push_back(test::random_unit(rng).vec());
  }
  const Rotation3 r = test::random_rotation(rng, 3.0);
  std::vector<Vec3> gt2;
  std::vector<Vec3> pred2;
  for (int i = 0; i < 30; ++i) {
    gt2.push_back(r * gt[i]);
    pred2.push_back(r * pred[i]);
  }
  const auto a = normal_metrics(normal_row(gt), normal_row(pred));
  const auto b = normal_metrics(normal_row(gt2), normal_row(pred2));
  EXPECT_NEAR(a.mean_deg, b.mean_deg, 1e-6);
  EXPECT_NEAR(a.median_deg, b.median_deg, 1e-6);
}

TEST(NormalMetrics, Errors) {
  EXPECT_THROW(normal_metrics(NormalMap(2, 1), normal_row({Vec3(0, 0, 1), Vec3(0, 0, 1)})), NoValidPixels);
  EXPECT_THROW(normal_metrics(NormalMap(3, 1), NormalMap(2, 1)), SizeMismatch);
}
