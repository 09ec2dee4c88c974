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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fednn {

// Squared L2 distance accumulated in double.
double squared_l2(std::span<const float> a, std::span<const float> b);

// Index of the nearest centroid (flat k x dim); ties go to the lowest index.
std::size_t nearest_centroid(std::span<const float> point, std::span<const float> centroids,
                             std::size_t dim, double* distance = nullptr);

struct KMeansOptions {
  std::size_t k = 0;
  std::size_t iterations = 25;
  std::uint64_t seed = 0;
  // Called once per Lloyd iteration with the centroids used for that
  // iteration's assignment step.
  std::function<void(std::size_t iteration, std::span<const float> centroids)> on_iteration;
};

struct KMeansResult {
  std::vector<float> centroids;          // k x dim
  std::vector<std::uint32_t> assignment;  // per point, against final centroids
  std::vector<double> objective;          // per iteration, then final
};

// Seeded k-means++ initialisation followed by Lloyd iterations. An empty
// cluster is reseeded to the point farthest from its assigned centroid.
// Requires points.size() / dim >= k.
KMeansResult kmeans(std::span<const float> points, std::size_t dim, const KMeansOptions& options);

}  // namespace fednn
