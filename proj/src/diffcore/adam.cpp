#include "demux/adam.hpp"

#include <cmath>

#include "demux/errors.hpp"

namespace demux::ad {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw DomainError("Adam learning rate must be positive");
}

void Adam::step(std::span<std::vector<double>> params, std::span<const std::vector<double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter and gradient block counts differ");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam: number of parameter blocks changed");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& p = params[b];
    const auto& g = grads[b];
    if (p.size() != m_[b].size() || g.size() != p.size()) throw ShapeError("Adam: block size changed");
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
  step(std::span<std::vector<double>>(&params, 1), std::span<const std::vector<double>>(&grad, 1));
}

}  // namespace demux::ad
