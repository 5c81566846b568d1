#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "demux/graph.hpp"

namespace oracle {

using demux::ad::Graph;
using demux::ad::Tensor;

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Random composition of ops on a [rows, cols] input. Kink-bearing ops report
// how close their inputs came to the kink so callers can reject samples.
struct RandomProgram {
  std::vector<int> ops;
  std::vector<Tensor> constants;
  std::vector<std::size_t> axes;
  std::size_t rows = 0, cols = 0;
  mutable double kink_distance = 1e9;

  static constexpr int kOps = 19;

  static RandomProgram make(std::mt19937_64& rng) {
    const std::size_t depth = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    std::uniform_int_distribution<int> pick(0, kOps - 1);
    std::vector<int> ops;
    for (std::size_t d = 0; d < depth; ++d) ops.push_back(pick(rng));
    return make_with(ops, rng);
  }

  /// Random shapes and constants for a fixed op sequence.
  static RandomProgram make_with(const std::vector<int>& ops, std::mt19937_64& rng) {
    RandomProgram p;
    std::uniform_int_distribution<std::size_t> dim(1, 16);
    p.rows = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    p.cols = dim(rng);
    std::size_t c = p.cols;
    for (const int op : ops) {
      p.ops.push_back(op);
      p.axes.push_back(std::uniform_int_distribution<std::size_t>(0, 1)(rng));
      if (op == 3) {  // matmul changes the width
        const std::size_t c2 = dim(rng);
        p.constants.push_back(Tensor({c, c2}, uniform(c * c2, -0.8, 0.8, rng)));
        c = c2;
      } else if (op == 1) {  // row broadcast
        p.constants.push_back(Tensor({c}, uniform(c, -1, 1, rng)));
      } else {
        p.constants.push_back(Tensor({p.rows, c}, uniform(p.rows * c, -1, 1, rng)));
      }
    }
    return p;
  }

  void near_kink(const Tensor& t, double kink) const {
    for (double v : t.values()) kink_distance = std::min(kink_distance, std::fabs(v - kink));
  }

  Tensor operator()(Graph& g, const Tensor& x) const {
    Tensor h = x;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      const auto& c = constants[k];
      switch (ops[k]) {
        case 0: h = g.add(h, c); break;
        case 1: h = g.sub(h, c); break;
        case 2: h = g.hadamard(h, c); break;
        case 3: h = g.matmul(h, c); break;
        case 4: h = g.scalar_mul(h, -1.7); break;
        case 5: h = g.neg(h); break;
        case 6: h = g.exp(g.tanh(h)); break;
        case 7: h = g.log(g.add(g.square(h), Tensor::scalar(0.5))); break;
        case 8: h = g.tanh(h); break;
        case 9: h = g.sigmoid(h); break;
        case 10: near_kink(h, 0.0); h = g.relu(h); break;
        case 11: h = g.softmax(h, axes[k]); break;
        case 12: h = g.square(h); break;
        case 13: near_kink(h, 0.0); h = g.abs(h); break;
        case 14:
          near_kink(h, -0.5);
          near_kink(h, 0.5);
          h = g.clamp(h, -0.5, 0.5);
          break;
        case 15: {
          const Tensor parts[] = {h, g.tanh(h)};
          h = g.slice(g.concat(parts, axes[k]), axes[k], 0, h.shape()[axes[k]]);
          h = g.add(h, g.scalar_mul(g.slice(g.concat(parts, axes[k]), axes[k], h.shape()[axes[k]],
                                            2 * h.shape()[axes[k]]),
                                    0.5));
          break;
        }
        case 16:
          near_kink(h, 0.0);
          h = g.hadamard(h, g.indicator_ge0(h));
          break;
        case 17:
          near_kink(h, 0.0);
          h = g.add(h, g.hadamard(g.square(h), g.indicator_lt0(h)));
          break;
        case 18: h = g.hadamard(h, g.mean(g.square(h))); break;
      }
    }
    return g.add(g.sum(g.square(h)), g.mean(h));
  }
};

}  // namespace oracle
