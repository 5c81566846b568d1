#include <algorithm>

#include "demux/errors.hpp"
#include "demux/explainer.hpp"

namespace demux::explain {

bool MaskMemory::accepts(const models::Classifier& f, std::span<const double> x, std::span<const double> theta,
                         std::size_t target, const ReplacementSet& replacements) {
  const std::size_t t_len = x.size();
  if (theta.size() != f.num_classes() * t_len) throw ShapeError("mask memory: theta has wrong size");
  const auto perturbed =
      perturb(x, theta.subspan(target * t_len, t_len), replacements.near_row(target), replacements.far_row(target));
  return f.predict(perturbed) == target;
}

bool MaskMemory::update(std::span<const double> theta, const models::Classifier& f, std::span<const double> x,
                        const ReplacementSet& replacements) {
  if (!accepts(f, x, theta, target_, replacements)) return false;
  push({theta.begin(), theta.end()});
  return true;
}

void MaskMemory::push(std::vector<double> theta) {
  if (theta.size() != classes_ * length_) throw ShapeError("mask memory: snapshot has wrong size");
  snapshots_.push_back(std::move(theta));
}

std::vector<double> MaskMemory::finalize(std::size_t m, std::span<const double> fallback, bool* used_fallback) const {
  if (m < 1) throw DomainError("memory window must be at least 1");
  if (used_fallback) *used_fallback = snapshots_.empty();
  if (snapshots_.empty()) return {fallback.begin(), fallback.end()};
  const std::size_t take = std::min(m, snapshots_.size());
  std::vector<double> mean(classes_ * length_, 0.0);
  for (std::size_t s = snapshots_.size() - take; s < snapshots_.size(); ++s) {
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += snapshots_[s][k];
  }
  for (auto& v : mean) v = std::clamp(v / static_cast<double>(take), -1.0, 1.0);
  return mean;
}

}  // namespace demux::explain
