#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demux/dataset.hpp"

namespace demux::explain {

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; the best of `restarts` runs by
/// inertia. Empty clusters are re-seeded with the point farthest from its
/// centroid.
KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = 10, std::size_t max_iter = 300);

/// Knee of a decreasing, convex curve (e.g. inertia against k) using Kneedle
/// with the given sensitivity. Returns an index into `x`, or no value if
/// the curve has no knee.
std::optional<std::size_t> kneedle(std::span<const double> x, std::span<const double> y, double sensitivity = 1.0);

struct ClusterModel {
  std::size_t k = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignments;
  /// inertia_curve[j] is the best inertia found with j + 1 clusters.
  std::vector<double> inertia_curve;
  std::vector<std::string> warnings;

  std::vector<std::size_t> members(std::size_t cluster) const;
  std::size_t nearest(std::span<const double> x) const;
  std::size_t farthest(std::span<const double> x) const;
};

/// KMeans for k = 1..k_max, Kneedle on the inertia curve, then a best-of-10
/// refit at the chosen k.
ClusterModel fit_clusters(const data::Dataset& background, std::size_t k_max, std::uint64_t seed);

/// Every background instance in one cluster (the no-cluster ablation).
ClusterModel single_cluster(const data::Dataset& background);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace demux::explain
