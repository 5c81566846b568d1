#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace demux::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed list of parameter blocks. Block sizes are fixed by the
/// first step() call.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// One update. `params[b]` is modified in place using `grads[b]`.
  void step(std::span<std::vector<double>> params, std::span<const std::vector<double>> grads);
  /// Single-block convenience.
  void step(std::vector<double>& params, const std::vector<double>& grad);

  std::size_t steps_taken() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace demux::ad
