#pragma once

// Partitioning Around Medoids with a deterministic farthest-point start.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "msr/error.hpp"

namespace msr {

struct KMedoidsResult {
  std::vector<std::size_t> medoids;     // indices into the input, in selection order
  std::vector<std::size_t> assignment;  // cluster index per point
  double total_cost = 0.0;              // sum of distances to the assigned medoid
};

namespace detail {

template <typename Distance>
void assign_to_medoids(std::size_t n, const std::vector<std::size_t>& medoids, Distance&& dist,
                       std::vector<std::size_t>& assignment, double& total) {
  assignment.assign(n, 0);
  total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < medoids.size(); ++c) {
      const double d = dist(j, medoids[c]);
      if (d < best) {
        best = d;
        assignment[j] = c;
      }
    }
    total += best;
  }
}

}  // namespace detail

/// PAM over `n` points with dissimilarity `dist(i, j)`.
///
/// Initialization: medoid 0 is `start`; each further medoid is the point
/// farthest from the current set (lowest index on ties). SWAP then applies the
/// best improving (medoid, non-medoid) exchange until none improves the cost.
template <typename Distance>
KMedoidsResult pam(std::size_t n, std::size_t k, std::size_t start, Distance&& dist) {
  if (n == 0) throw EmptyInput("pam: no points");
  if (k == 0 || k > n) throw InvalidArgument("pam: k must be in [1, n]");
  if (start >= n) throw InvalidArgument("pam: start index out of range");

  std::vector<std::size_t> medoids{start};
  std::vector<char> is_medoid(n, 0);
  is_medoid[start] = 1;
  std::vector<double> nearest(n);
  for (std::size_t j = 0; j < n; ++j) nearest[j] = dist(j, start);
  while (medoids.size() < k) {
    std::size_t far = n;
    double far_d = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!is_medoid[j] && nearest[j] > far_d) {
        far_d = nearest[j];
        far = j;
      }
    }
    medoids.push_back(far);
    is_medoid[far] = 1;
    for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(j, far));
  }

  // d1/d2: distance to the nearest and second-nearest medoid; c1: slot of the nearest.
  std::vector<double> d1(n);
  std::vector<double> d2(n);
  std::vector<std::size_t> c1(n);
  auto refresh = [&] {
    for (std::size_t j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      double second = std::numeric_limits<double>::infinity();
      std::size_t slot = 0;
      for (std::size_t c = 0; c < medoids.size(); ++c) {
        const double d = dist(j, medoids[c]);
        if (d < best) {
          second = best;
          best = d;
          slot = c;
        } else if (d < second) {
          second = d;
        }
      }
      d1[j] = best;
      d2[j] = second;
      c1[j] = slot;
    }
  };

  refresh();
  double cost = 0.0;
  for (double d : d1) cost += d;

  // Relative tolerance keeps floating-point noise from cycling swaps.
  const double tol = 1e-12;
  for (std::size_t iter = 0; iter < 1000; ++iter) {
    double best_delta = 0.0;
    std::size_t best_slot = 0;
    std::size_t best_point = n;
    for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
      for (std::size_t o = 0; o < n; ++o) {
        if (is_medoid[o]) continue;
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double djo = dist(j, o);
          const double keep = c1[j] == slot ? d2[j] : d1[j];
          delta += std::min(keep, djo) - d1[j];
        }
        if (delta < best_delta - tol * (1.0 + cost)) {
          best_delta = delta;
          best_slot = slot;
          best_point = o;
        }
      }
    }
    if (best_point == n) break;
    is_medoid[medoids[best_slot]] = 0;
    medoids[best_slot] = best_point;
    is_medoid[best_point] = 1;
    refresh();
    cost = 0.0;
    for (double d : d1) cost += d;
  }

  KMedoidsResult out;
  out.medoids = medoids;
  detail::assign_to_medoids(n, medoids, dist, out.assignment, out.total_cost);
  return out;
}

/// Work bound (subsets x points x medoids) under which exact_kmedoids is used.
inline constexpr double kExactKMedoidsBudget = 2e7;

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

inline bool exact_kmedoids_affordable(std::size_t n, std::size_t k) {
  return binomial(n, k) * static_cast<double>(n) * static_cast<double>(k) <= kExactKMedoidsBudget;
}

/// Globally optimal medoids by enumerating every k-subset; the first optimal
/// subset in lexicographic order wins.
template <typename Distance>
KMedoidsResult exact_kmedoids(std::size_t n, std::size_t k, Distance&& dist) {
  if (n == 0) throw EmptyInput("exact_kmedoids: no points");
  if (k == 0 || k > n) throw InvalidArgument("exact_kmedoids: k must be in [1, n]");
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<std::size_t> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (;;) {
    double cost = 0.0;
    for (std::size_t j = 0; j < n && cost < best_cost; ++j) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t c : idx) m = std::min(m, dist(j, c));
      cost += m;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = idx;
    }
    // next combination
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  KMedoidsResult out;
  out.medoids = best;
  detail::assign_to_medoids(n, best, dist, out.assignment, out.total_cost);
  return out;
}

}  // namespace msr
