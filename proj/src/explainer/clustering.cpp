#include "demux/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "demux/errors.hpp"

namespace demux::explain {
namespace {

std::vector<std::vector<double>> plus_plus_init(std::span<const std::vector<double>> pts, std::size_t k,
                                                std::mt19937_64& rng) {
  std::vector<std::vector<double>> centers;
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = squared_distance(pts[i], centers[0]);
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        target -= d2[i];
        if (target <= 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers.push_back(pts[chosen]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], squared_distance(pts[i], centers.back()));
  }
  return centers;
}

KMeansResult lloyd(std::span<const std::vector<double>> pts, std::vector<std::vector<double>> centers,
                   std::size_t max_iter) {
  const std::size_t n = pts.size();
  const std::size_t k = centers.size();
  const std::size_t dim = pts[0].size();
  std::vector<std::size_t> assign(n, k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(pts[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t t = 0; t < dim; ++t) sums[assign[i]][t] += pts[i][t];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed with the point worst served by its current centroid.
        std::size_t worst = 0;
        double worst_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = squared_distance(pts[i], centers[assign[i]]);
          if (d > worst_d) {
            worst_d = d;
            worst = i;
          }
        }
        centers[c] = pts[worst];
        assign[worst] = c;
        changed = true;
        continue;
      }
      for (std::size_t t = 0; t < dim; ++t) centers[c][t] = sums[c][t] / static_cast<double>(counts[c]);
    }
    if (!changed && iter > 0) break;
  }
  // Final assignment against the final centroids so the nearest-centroid
  // invariant holds exactly.
  KMeansResult r;
  r.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = squared_distance(pts[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    r.assignments[i] = best;
    r.inertia += best_d;
  }
  r.centroids = std::move(centers);
  return r;
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance between series of different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts, std::size_t max_iter) {
  if (points.empty()) throw DataError(DataError::Kind::Invalid, "kmeans on an empty set");
  if (k == 0 || k > points.size()) {
    throw DataError(DataError::Kind::Invalid,
                    "kmeans needs 1 <= k <= N, got k=" + std::to_string(k) + ", N=" + std::to_string(points.size()));
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t run = 0; run < std::max<std::size_t>(1, restarts); ++run) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(run)};
    std::mt19937_64 rng(seq);
    auto r = lloyd(points, plus_plus_init(points, k, rng), max_iter);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

std::optional<std::size_t> kneedle(std::span<const double> x, std::span<const double> y, double sensitivity) {
  const std::size_t n = x.size();
  if (n != y.size()) throw ShapeError("kneedle: x and y differ in length");
  if (n < 3) return std::nullopt;
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*xmax - *xmin <= 0.0 || *ymax - *ymin <= 0.0) return std::nullopt;

  // Normalize to the unit square and flip y so the decreasing convex curve
  // becomes increasing concave; the knee is where it pulls away most from
  // the diagonal.
  std::vector<double> xn(n), diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    xn[i] = (x[i] - *xmin) / (*xmax - *xmin);
    const double yn = (y[i] - *ymin) / (*ymax - *ymin);
    diff[i] = (1.0 - yn) - xn[i];
  }
  double mean_step = 0.0;
  for (std::size_t i = 1; i < n; ++i) mean_step += std::fabs(xn[i] - xn[i - 1]);
  mean_step /= static_cast<double>(n - 1);

  auto is_max = [&](std::size_t i) {
    const double l = diff[i == 0 ? 0 : i - 1];
    const double r = diff[i + 1 < n ? i + 1 : i];
    return diff[i] >= l && diff[i] >= r;
  };
  auto is_min = [&](std::size_t i) {
    const double l = diff[i == 0 ? 0 : i - 1];
    const double r = diff[i + 1 < n ? i + 1 : i];
    return diff[i] <= l && diff[i] <= r;
  };

  std::size_t first_max = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_max(i)) {
      first_max = i;
      break;
    }
  }
  if (first_max == n) return std::nullopt;

  double threshold = 0.0;
  std::size_t threshold_index = first_max;
  for (std::size_t i = first_max; i + 1 < n; ++i) {
    if (is_max(i)) {
      threshold = diff[i] - sensitivity * mean_step;
      threshold_index = i;
    }
    if (is_min(i)) threshold = 0.0;
    if (diff[i + 1] < threshold) return threshold_index;
  }
  return std::nullopt;
}

std::vector<std::size_t> ClusterModel::members(std::size_t cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == cluster) out.push_back(i);
  }
  return out;
}

std::size_t ClusterModel::nearest(std::span<const double> x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::size_t ClusterModel::farthest(std::span<const double> x) const {
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d > best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

ClusterModel fit_clusters(const data::Dataset& background, std::size_t k_max, std::uint64_t seed) {
  const std::size_t n = background.size();
  if (n < 2) throw DataError(DataError::Kind::Invalid, "clustering needs at least 2 background instances");
  if (k_max < 1 || k_max > n) {
    throw DataError(DataError::Kind::Invalid,
                    "k_max must lie in [1, N]; got " + std::to_string(k_max) + " with N=" + std::to_string(n));
  }
  const auto& pts = background.series;

  ClusterModel model;
  std::vector<double> ks;
  for (std::size_t k = 1; k <= k_max; ++k) {
    model.inertia_curve.push_back(kmeans(pts, k, seed).inertia);
    ks.push_back(static_cast<double>(k));
  }

  const double top = model.inertia_curve.front();
  const double floor = *std::min_element(model.inertia_curve.begin(), model.inertia_curve.end());
  std::size_t chosen = 1;
  if (top <= 1e-12) {
    model.warnings.push_back("all background instances are identical; using a single cluster");
  } else if (auto knee = kneedle(ks, model.inertia_curve)) {
    chosen = *knee + 1;
  } else {
    // No knee: the smallest k that reaches the lowest inertia seen.
    for (std::size_t j = 0; j < model.inertia_curve.size(); ++j) {
      if (model.inertia_curve[j] <= floor + 1e-12 * top) {
        chosen = j + 1;
        break;
      }
    }
  }

  auto fit = kmeans(pts, chosen, seed, 10);
  model.k = chosen;
  model.centroids = std::move(fit.centroids);
  model.assignments = std::move(fit.assignments);
  return model;
}

ClusterModel single_cluster(const data::Dataset& background) {
  ClusterModel model;
  model.k = 1;
  std::vector<double> mean(background.length(), 0.0);
  for (const auto& s : background.series) {
    for (std::size_t t = 0; t < s.size(); ++t) mean[t] += s[t];
  }
  for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(1, background.size()));
  model.centroids.push_back(std::move(mean));
  model.assignments.assign(background.size(), 0);
  return model;
}

}  // namespace demux::explain
