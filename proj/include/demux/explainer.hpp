#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "demux/classifier.hpp"
#include "demux/clustering.hpp"
#include "demux/dataset.hpp"
#include "demux/graph.hpp"
#include "demux/saliency.hpp"

namespace demux::explain {

/// Which background series fills one class row, and whether it was freshly
/// drawn this round (as opposed to carried over from the previous set).
struct ReplacementChoice {
  std::size_t cluster = 0;
  std::size_t member = 0;
  bool resampled = true;
};

/// Per-class replacement rows drawn from the nearest and farthest clusters.
/// Every row is a verbatim copy of a background instance.
struct ReplacementSet {
  std::size_t num_classes = 0;
  std::size_t length = 0;
  std::vector<double> near;  // C x T
  std::vector<double> far;   // C x T
  std::vector<ReplacementChoice> near_choice;
  std::vector<ReplacementChoice> far_choice;
  std::vector<std::string> warnings;

  std::span<const double> near_row(std::size_t cls) const { return {near.data() + cls * length, length}; }
  std::span<const double> far_row(std::size_t cls) const { return {far.data() + cls * length, length}; }
};

/// Epsilon-greedy draw: each row of `prev` is kept with probability 1 - eps,
/// otherwise redrawn uniformly from its cluster. Without `prev` every row is
/// drawn. An empty cluster falls back to the nearest non-empty one.
ReplacementSet select_replacements(std::span<const double> x, const ClusterModel& clusters,
                                   const data::Dataset& background, std::size_t num_classes,
                                   const ReplacementSet* prev, double eps, std::mt19937_64& rng);
ReplacementSet select_replacements(std::span<const double> x, const ClusterModel& clusters,
                                   const data::Dataset& background, std::size_t num_classes,
                                   const ReplacementSet* prev, double eps, std::uint64_t seed);

/// theta * x + (1 - theta) * (r_near where theta < 0, r_far elsewhere) + noise.
/// Throws DomainError if any theta lies outside [-1, 1].
std::vector<double> perturb(std::span<const double> x, std::span<const double> theta, std::span<const double> r_near,
                            std::span<const double> r_far, double noise_std, std::mt19937_64& rng);
std::vector<double> perturb(std::span<const double> x, std::span<const double> theta, std::span<const double> r_near,
                            std::span<const double> r_far);

/// Graph form over all class rows at once. `x` is [T] (broadcast over rows);
/// theta, r_near, r_far and noise are [C, T]. Gradient reaches theta through
/// the interpolation only.
ad::Tensor perturb(ad::Graph& g, const ad::Tensor& x, const ad::Tensor& theta, const ad::Tensor& r_near,
                   const ad::Tensor& r_far, const ad::Tensor& noise);

/// KL(p || q) with a 1e-12 floor inside both logs.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct ExplainerConfig {
  double lambda_prev = 0.7;
  double lambda_max = 0.5;
  double lambda_budget = 0.2;
  double lambda_treg = 0.2;
  double lambda_ssd = 0.2;
  double epsilon = 0.3;
  double noise_std = 0.01;
  std::size_t epochs = 5000;
  double learning_rate = 1e-3;
  std::size_t memory_window = 10;
  /// Largest k tried when clustering the background (capped at its size).
  std::size_t k_max = 10;
  std::uint64_t seed = 0;

  bool no_cluster = false;
  bool no_mask_memory = false;
  bool no_kl = false;
  bool no_tvnorm = false;
  bool no_budget = false;
  bool no_ssd = false;

  /// Throws DomainError unless all lambdas >= 0, 0 <= eps <= 1, m >= 1,
  /// lr > 0 and noise_std >= 0.
  void validate() const;
};

/// Individual loss values, each already scaled by its lambda.
struct LossBreakdown {
  double prev = 0.0;
  double max = 0.0;
  double budget = 0.0;
  double treg = 0.0;
  double ssd = 0.0;

  double total() const { return prev + max + budget + treg + ssd; }
};

/// Everything the loss needs besides theta.
struct LossContext {
  const models::Classifier* model = nullptr;
  std::vector<double> x;
  std::size_t target = 0;
  /// f(x); constant during optimization.
  std::vector<double> y_hat;
  const ReplacementSet* replacements = nullptr;
  /// C x T additive noise; empty means none.
  std::vector<double> noise;
};

struct LossGraph {
  ad::Tensor total;
  LossBreakdown parts;
};

/// Records the combined objective for a [C, T] theta. Components switched off
/// by cfg's ablation flags are left out of the graph and reported as 0.
LossGraph build_loss(ad::Graph& g, const ad::Tensor& theta, const LossContext& ctx, const ExplainerConfig& cfg);

ad::Tensor loss_ssd(ad::Graph& g, const ad::Tensor& theta, std::size_t target, std::span<const double> y_hat,
                    double lambda);
ad::Tensor loss_budget(ad::Graph& g, const ad::Tensor& theta, double lambda);
ad::Tensor loss_treg(ad::Graph& g, const ad::Tensor& theta, double lambda);

// Plain evaluations (noise off). theta is C x T row-major.
double loss_ssd(std::span<const double> theta, std::size_t classes, std::size_t target,
                std::span<const double> y_hat, double lambda);
double loss_budget(std::span<const double> theta, std::size_t classes, double lambda);
double loss_treg(std::span<const double> theta, std::size_t classes, double lambda);
double loss_prev(const models::Classifier& f, std::span<const double> x, std::span<const double> theta_z,
                 std::span<const double> r_near, std::span<const double> r_far, double lambda);
double loss_max(const models::Classifier& f, std::span<const double> x, std::span<const double> theta,
                std::size_t target, const ReplacementSet& replacements, double lambda);

/// Repository of theta snapshots whose z-row perturbation (noise off) is
/// still classified as z.
class MaskMemory {
 public:
  MaskMemory(std::size_t classes, std::size_t length, std::size_t target)
      : classes_(classes), length_(length), target_(target) {}

  static bool accepts(const models::Classifier& f, std::span<const double> x, std::span<const double> theta,
                      std::size_t target, const ReplacementSet& replacements);

  /// Appends a copy of theta if accepts(); returns whether it did.
  bool update(std::span<const double> theta, const models::Classifier& f, std::span<const double> x,
              const ReplacementSet& replacements);
  /// Unconditional append.
  void push(std::vector<double> theta);

  std::size_t size() const noexcept { return snapshots_.size(); }
  bool empty() const noexcept { return snapshots_.empty(); }
  const std::vector<std::vector<double>>& snapshots() const noexcept { return snapshots_; }

  /// Mean of the last min(m, size) snapshots, clamped to [-1, 1]. With an
  /// empty repository returns `fallback` and sets *used_fallback.
  std::vector<double> finalize(std::size_t m, std::span<const double> fallback, bool* used_fallback = nullptr) const;

 private:
  std::size_t classes_, length_, target_;
  std::vector<std::vector<double>> snapshots_;
};

struct Diagnostics {
  std::vector<LossBreakdown> loss_history;
  std::size_t accepted = 0;
  double acceptance_rate = 0.0;
  std::size_t cluster_count = 0;
  std::size_t near_cluster = 0;
  std::size_t far_cluster = 0;
  /// Resample counts over all epochs, summed over class rows.
  std::size_t near_resamples = 0;
  std::size_t far_resamples = 0;
  /// Replacement set in use at the last epoch.
  ReplacementSet last_replacements;
  std::vector<double> final_theta;
  bool used_fallback = false;
  std::vector<std::string> warnings;
};

struct Explanation {
  SaliencyMap map;
  Diagnostics diagnostics;
};

/// Learns a class-specific saliency map for the predicted class of x.
Explanation explain(const models::Classifier& f, std::span<const double> x, const data::Dataset& background,
                    const ExplainerConfig& cfg);
/// Same, with the background clustering precomputed (ignored under no_cluster).
Explanation explain(const models::Classifier& f, std::span<const double> x, const data::Dataset& background,
                    const ClusterModel& clusters, const ExplainerConfig& cfg);

/// RISE: random keep-masks that zero dropped steps. Only the target row is
/// filled; it is scaled to [-1, 1] by its largest magnitude.
SaliencyMap baseline_rise(const models::Classifier& f, std::span<const double> x, std::size_t n_masks,
                          double keep_prob, std::uint64_t seed);

/// Target row uniform on [-1, 1]; other rows zero.
SaliencyMap baseline_random(const models::Classifier& f, std::span<const double> x, std::uint64_t seed);

}  // namespace demux::explain
