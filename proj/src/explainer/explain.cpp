#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "demux/adam.hpp"
#include "demux/errors.hpp"
#include "demux/explainer.hpp"

namespace demux::explain {
namespace {

void check_inputs(const models::Classifier& f, std::span<const double> x, const data::Dataset& background) {
  if (x.size() != f.series_length()) {
    throw ShapeError("instance length " + std::to_string(x.size()) + " differs from model input length " +
                     std::to_string(f.series_length()));
  }
  if (background.size() == 0) throw DataError(DataError::Kind::Invalid, "background dataset is empty");
  if (background.length() != x.size()) throw ShapeError("background series length differs from the instance");
}

}  // namespace

Explanation explain(const models::Classifier& f, std::span<const double> x, const data::Dataset& background,
                    const ExplainerConfig& cfg) {
  cfg.validate();
  check_inputs(f, x, background);
  if (cfg.no_cluster) return explain(f, x, background, single_cluster(background), cfg);
  const std::size_t k_max = std::min(cfg.k_max, background.size());
  return explain(f, x, background, fit_clusters(background, k_max, cfg.seed), cfg);
}

Explanation explain(const models::Classifier& f, std::span<const double> x, const data::Dataset& background,
                    const ClusterModel& fitted, const ExplainerConfig& cfg) {
  cfg.validate();
  check_inputs(f, x, background);
  const ClusterModel clusters = cfg.no_cluster ? single_cluster(background) : fitted;

  const std::size_t classes = f.num_classes();
  const std::size_t t_len = x.size();

  LossContext ctx;
  ctx.model = &f;
  ctx.x.assign(x.begin(), x.end());
  ctx.y_hat = f.predict_proba(x);
  ctx.target = static_cast<std::size_t>(std::max_element(ctx.y_hat.begin(), ctx.y_hat.end()) - ctx.y_hat.begin());
  const std::size_t z = ctx.target;

  Explanation result;
  auto& diag = result.diagnostics;
  diag.warnings = clusters.warnings;
  diag.cluster_count = clusters.k;
  diag.near_cluster = clusters.nearest(x);
  diag.far_cluster = clusters.farthest(x);

  std::mt19937_64 rng(cfg.seed);
  std::vector<double> theta(classes * t_len);
  std::uniform_real_distribution<double> init(-0.05, 0.05);
  for (auto& v : theta) v = init(rng);

  ad::Adam adam({cfg.learning_rate});
  MaskMemory memory(classes, t_len, z);
  ReplacementSet repl = select_replacements(x, clusters, background, classes, nullptr, cfg.epsilon, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  diag.loss_history.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) {
      repl = select_replacements(x, clusters, background, classes, &repl, cfg.epsilon, rng);
      for (std::size_t c = 0; c < classes; ++c) {
        diag.near_resamples += repl.near_choice[c].resampled;
        diag.far_resamples += repl.far_choice[c].resampled;
      }
    }
    ctx.replacements = &repl;
    ctx.noise.clear();
    if (cfg.noise_std > 0.0) {
      ctx.noise.resize(classes * t_len);
      for (auto& v : ctx.noise) v = cfg.noise_std * gauss(rng);
    }

    ad::Graph g;
    const auto th = g.parameter(ad::Tensor({classes, t_len}, theta));
    const auto loss = build_loss(g, th, ctx, cfg);
    const double value = loss.total.item();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "explanation loss became " << value << " at epoch " << epoch << "; try a smaller learning rate (current "
         << cfg.learning_rate << ")";
      throw NumericalError(os.str());
    }
    const auto grads = g.backward(loss.total);
    adam.step(theta, grads.of(th).to_vector());
    for (auto& v : theta) v = std::clamp(v, -1.0, 1.0);
    diag.loss_history.push_back(loss.parts);

    if (!cfg.no_mask_memory) diag.accepted += memory.update(theta, f, x, repl);
  }

  for (const auto& w : repl.warnings) diag.warnings.push_back(w);
  diag.last_replacements = repl;
  diag.final_theta = theta;
  if (cfg.epochs > 0) diag.acceptance_rate = static_cast<double>(diag.accepted) / static_cast<double>(cfg.epochs);

  result.map = SaliencyMap(classes, t_len, z, cfg.seed);
  if (cfg.no_mask_memory) {
    result.map.values = theta;
  } else {
    result.map.values = memory.finalize(cfg.memory_window, theta, &diag.used_fallback);
    if (diag.used_fallback) {
      diag.warnings.push_back("no saliency map kept the predicted class; returning the last optimizer state");
    }
  }
  return result;
}

SaliencyMap baseline_rise(const models::Classifier& f, std::span<const double> x, std::size_t n_masks,
                          double keep_prob, std::uint64_t seed) {
  if (n_masks == 0) throw DomainError("RISE needs at least one mask");
  if (!(keep_prob > 0.0 && keep_prob < 1.0)) throw DomainError("RISE keep probability must lie in (0, 1)");
  if (x.size() != f.series_length()) throw ShapeError("instance length differs from model input length");
  const std::size_t t_len = x.size();
  const std::size_t z = f.predict(x);

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(keep_prob);
  std::vector<std::vector<char>> masks(n_masks, std::vector<char>(t_len));
  std::vector<std::vector<double>> inputs(n_masks, std::vector<double>(t_len));
  for (std::size_t m = 0; m < n_masks; ++m) {
    for (std::size_t t = 0; t < t_len; ++t) {
      masks[m][t] = keep(rng);
      inputs[m][t] = masks[m][t] ? x[t] : 0.0;
    }
  }
  const auto probs = f.predict_batch(inputs);

  SaliencyMap map(f.num_classes(), t_len, z, seed);
  double peak = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    double kept = 0.0, dropped = 0.0;
    std::size_t n_kept = 0, n_dropped = 0;
    for (std::size_t m = 0; m < n_masks; ++m) {
      if (masks[m][t]) {
        kept += probs[m][z];
        ++n_kept;
      } else {
        dropped += probs[m][z];
        ++n_dropped;
      }
    }
    const double v = (n_kept && n_dropped) ? kept / n_kept - dropped / n_dropped : 0.0;
    map.at(z, t) = v;
    peak = std::max(peak, std::fabs(v));
  }
  // differences at round-off level mean the class score ignores every mask
  if (peak > 1e-12) {
    for (std::size_t t = 0; t < t_len; ++t) map.at(z, t) /= peak;
  } else {
    for (std::size_t t = 0; t < t_len; ++t) map.at(z, t) = 0.0;
  }
  return map;
}

SaliencyMap baseline_random(const models::Classifier& f, std::span<const double> x, std::uint64_t seed) {
  if (x.size() != f.series_length()) throw ShapeError("instance length differs from model input length");
  SaliencyMap map(f.num_classes(), x.size(), f.predict(x), seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : map.row(map.target)) v = u(rng);
  return map;
}

}  // namespace demux::explain
