#include "demux/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "demux/errors.hpp"

namespace demux::ad {
namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  Graph g;
  return f(g, g.constant(x)).item();
}

}  // namespace

std::vector<double> numeric_gradient(const ScalarFunction& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  std::vector<double> grad(x.size());
  std::vector<double> shifted = x.to_vector();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = shifted[i];
    shifted[i] = orig + h;
    const double up = evaluate(f, Tensor(x.shape(), shifted));
    shifted[i] = orig - h;
    const double down = evaluate(f, Tensor(x.shape(), shifted));
    shifted[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double finite_difference_check(const ScalarFunction& f, const Tensor& x, double h) {
  Graph g;
  const Tensor leaf = g.parameter(x);
  const Tensor root = f(g, leaf);
  const Tensor analytic = g.backward(root).of(leaf);
  const auto numeric = numeric_gradient(f, x, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double err = std::fabs(analytic[i] - numeric[i]) / std::max(1.0, std::fabs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace demux::ad
