#include <algorithm>
#include <limits>

#include "demux/errors.hpp"
#include "demux/explainer.hpp"

namespace demux::explain {
namespace {

// The cluster to draw from, or the non-empty cluster whose centroid lies
// closest to it when it has no members.
std::size_t usable_cluster(const ClusterModel& clusters, std::size_t wanted, std::vector<std::string>& warnings) {
  if (!clusters.members(wanted).empty()) return wanted;
  std::size_t best = wanted;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < clusters.centroids.size(); ++c) {
    if (c == wanted || clusters.members(c).empty()) continue;
    const double d = squared_distance(clusters.centroids[c], clusters.centroids[wanted]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best == wanted) throw DataError(DataError::Kind::Invalid, "every cluster is empty");
  warnings.push_back("cluster " + std::to_string(wanted) + " is empty; drawing from cluster " + std::to_string(best));
  return best;
}

ReplacementChoice draw(const std::vector<std::size_t>& members, std::size_t cluster, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  return {cluster, members[pick(rng)], true};
}

void check_theta(std::span<const double> theta) {
  for (double v : theta) {
    if (!(v >= -1.0 && v <= 1.0)) throw DomainError("saliency value " + std::to_string(v) + " outside [-1, 1]");
  }
}

}  // namespace

ReplacementSet select_replacements(std::span<const double> x, const ClusterModel& clusters,
                                   const data::Dataset& background, std::size_t num_classes,
                                   const ReplacementSet* prev, double eps, std::mt19937_64& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  if (clusters.centroids.empty()) throw DataError(DataError::Kind::Invalid, "cluster model has no centroids");
  if (clusters.assignments.size() != background.size()) {
    throw ShapeError("cluster assignments do not match the background dataset");
  }
  const std::size_t t_len = x.size();
  if (background.length() != t_len) throw ShapeError("background length differs from the instance length");

  ReplacementSet out;
  out.num_classes = num_classes;
  out.length = t_len;
  const std::size_t k_near = usable_cluster(clusters, clusters.nearest(x), out.warnings);
  const std::size_t k_far = usable_cluster(clusters, clusters.farthest(x), out.warnings);
  const auto near_members = clusters.members(k_near);
  const auto far_members = clusters.members(k_far);

  const bool reuse = prev != nullptr && prev->num_classes == num_classes && prev->length == t_len &&
                     prev->near_choice.size() == num_classes && prev->far_choice.size() == num_classes;
  std::bernoulli_distribution resample(eps);
  for (std::size_t c = 0; c < num_classes; ++c) {
    ReplacementChoice n, f;
    // Both draws keep the previous row with probability
    // 1 - eps. A previous row from a different cluster is never kept.
    if (reuse && !resample(rng) && prev->near_choice[c].cluster == k_near) {
      n = prev->near_choice[c];
      n.resampled = false;
    } else {
      n = draw(near_members, k_near, rng);
    }
    if (reuse && !resample(rng) && prev->far_choice[c].cluster == k_far) {
      f = prev->far_choice[c];
      f.resampled = false;
    } else {
      f = draw(far_members, k_far, rng);
    }
    out.near_choice.push_back(n);
    out.far_choice.push_back(f);
  }
  out.near.reserve(num_classes * t_len);
  out.far.reserve(num_classes * t_len);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto rn = background.row(out.near_choice[c].member);
    const auto rf = background.row(out.far_choice[c].member);
    out.near.insert(out.near.end(), rn.begin(), rn.end());
    out.far.insert(out.far.end(), rf.begin(), rf.end());
  }
  return out;
}

ReplacementSet select_replacements(std::span<const double> x, const ClusterModel& clusters,
                                   const data::Dataset& background, std::size_t num_classes,
                                   const ReplacementSet* prev, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return select_replacements(x, clusters, background, num_classes, prev, eps, rng);
}

std::vector<double> perturb(std::span<const double> x, std::span<const double> theta, std::span<const double> r_near,
                            std::span<const double> r_far, double noise_std, std::mt19937_64& rng) {
  const std::size_t n = x.size();
  if (theta.size() != n || r_near.size() != n || r_far.size() != n) {
    throw ShapeError("perturb: x, theta and replacements must have equal length");
  }
  if (noise_std < 0.0) throw DomainError("noise std must be non-negative");
  check_theta(theta);
  std::vector<double> out(n);
  std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double r = theta[t] < 0.0 ? r_near[t] : r_far[t];
    out[t] = theta[t] * x[t] + (1.0 - theta[t]) * r;
    if (noise_std > 0.0) out[t] += noise(rng);
  }
  return out;
}

std::vector<double> perturb(std::span<const double> x, std::span<const double> theta, std::span<const double> r_near,
                            std::span<const double> r_far) {
  std::mt19937_64 unused(0);
  return perturb(x, theta, r_near, r_far, 0.0, unused);
}

ad::Tensor perturb(ad::Graph& g, const ad::Tensor& x, const ad::Tensor& theta, const ad::Tensor& r_near,
                   const ad::Tensor& r_far, const ad::Tensor& noise) {
  if (theta.rank() != 2) throw ShapeError("perturb: theta must be [C, T]");
  if (r_near.shape() != theta.shape() || r_far.shape() != theta.shape()) {
    throw ShapeError("perturb: replacement matrices must match theta's shape");
  }
  check_theta(theta.values());
  const auto replacement = g.add(g.hadamard(g.indicator_lt0(theta), r_near), g.hadamard(g.indicator_ge0(theta), r_far));
  const auto one_minus = g.sub(ad::Tensor::scalar(1.0), theta);
  auto out = g.add(g.hadamard(theta, x), g.hadamard(one_minus, replacement));
  if (noise.shape() == theta.shape()) out = g.add(out, noise);
  return out;
}

}  // namespace demux::explain
