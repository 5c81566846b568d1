#pragma once

#include <functional>

#include "demux/graph.hpp"

namespace demux::ad {

/// Builds a scalar from the leaf it is handed. Called once on a parameter
/// leaf for the analytic gradient and 2*size(x) more times on shifted
/// constants for the numeric one.
using ScalarFunction = std::function<Tensor(Graph&, const Tensor&)>;

/// max_i |analytic_i - central_difference_i| / max(1, |analytic_i|)
double finite_difference_check(const ScalarFunction& f, const Tensor& x, double h = 1e-5);

/// Central-difference gradient of f at x.
std::vector<double> numeric_gradient(const ScalarFunction& f, const Tensor& x, double h = 1e-5);

}  // namespace demux::ad
