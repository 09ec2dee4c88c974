// Copyright 2026 The FedNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fednn/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fednn/error.hpp"
#include "fednn/random.hpp"

namespace fednn {

double squared_l2(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += diff * diff;
  }
  return s;
}

std::size_t nearest_centroid(std::span<const float> point, std::span<const float> centroids,
                             std::size_t dim, double* distance) {
  const std::size_t k = centroids.size() / dim;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = squared_l2(point, centroids.subspan(c * dim, dim));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (distance) *distance = best_d;
  return best;
}

namespace {

std::vector<float> init_plus_plus(std::span<const float> points, std::size_t dim, std::size_t k,
                                  rnd::Engine& rng) {
  const std::size_t n = points.size() / dim;
  std::vector<float> centroids;
  centroids.reserve(k * dim);
  auto point = [&](std::size_t i) { return points.subspan(i * dim, dim); };

  std::size_t first = static_cast<std::size_t>(rnd::uniform_index(rng, n));
  centroids.insert(centroids.end(), point(first).begin(), point(first).end());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_l2(point(i), point(first));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rnd::uniform01(rng) * total;
      pick = n - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rnd::uniform_index(rng, n));
    }
    auto chosen = point(pick);
    centroids.insert(centroids.end(), chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_l2(point(i), chosen));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const float> points, std::size_t dim, const KMeansOptions& options) {
  if (dim == 0 || points.size() % dim != 0) throw DimensionError("k-means input is not n x dim");
  const std::size_t n = points.size() / dim;
  const std::size_t k = options.k;
  if (k == 0) throw InvalidArgument("k-means needs k >= 1");
  if (n < k) {
    throw InvalidArgument("k-means needs at least " + std::to_string(k) + " points, got " +
                          std::to_string(n));
  }
  for (float v : points) {
    if (!std::isfinite(v)) throw InvalidArgument("k-means input contains non-finite values");
  }

  rnd::Engine rng(options.seed);
  KMeansResult result;
  result.centroids = init_plus_plus(points, dim, k, rng);
  result.assignment.assign(n, 0);
  auto point = [&](std::size_t i) { return points.subspan(i * dim, dim); };

  std::vector<double> dist(n);
  auto assign = [&] {
    double objective = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::uint32_t>(nearest_centroid(point(i), result.centroids, dim, &dist[i]));
      changed |= c != result.assignment[i];
      result.assignment[i] = c;
      objective += dist[i];
    }
    return std::pair{objective, changed};
  };

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < options.iterations; ++iter) {
    if (options.on_iteration) options.on_iteration(iter, result.centroids);
    auto [objective, changed] = assign();
    result.objective.push_back(objective);
    if (iter > 0 && !changed) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignment[i];
      ++counts[c];
      auto p = point(i);
      for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += p[j];
    }
    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) {
          result.centroids[c * dim + j] =
              static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
        }
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      used[far] = true;
      std::copy(point(far).begin(), point(far).end(), result.centroids.begin() + c * dim);
    }
  }
  result.objective.push_back(assign().first);
  return result;
}

}  // namespace fednn
