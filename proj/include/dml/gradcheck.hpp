#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>

#include "dml/autodiff.hpp"
#include "dml/params.hpp"

namespace dml {

/// Builds a scalar on a fresh tape from the parameters in the store. The
/// closure must bind parameters with Tape::parameter so their adjoints can
/// be read back.
using ScalarFn = std::function<NodeId(Tape&, const ParameterStore&)>;

struct FiniteDifferenceOptions {
  double eps = 1e-5;
  /// Parameters whose gradient is blocked by design; skipped.
  std::set<std::string> excluded;
  /// When nonzero, check at most this many elements per parameter, chosen
  /// deterministically from sample_seed.
  std::size_t max_elements_per_parameter = 0;
  std::uint64_t sample_seed = 0;
  /// Hold every stop_gradient output at its unperturbed value, so the
  /// numeric derivative follows the same blocking as the reverse sweep.
  bool hold_detached = false;
  /// When nonzero, compare directional derivatives along this many random
  /// ±1 directions per parameter instead of single elements. Elementwise
  /// relative error is dominated by roundoff for components near zero.
  /// A directional error is taken relative to the summed magnitude of its
  /// terms, so a direction along which the gradient nearly cancels is not
  /// judged on the cancelled remainder.
  std::size_t directions_per_parameter = 0;
};

struct FiniteDifferenceResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;  // element, or direction in directional mode
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// |a − n| / max(|a|, |n|, terms), absolute when that scale is below 1e-8.
/// terms is Σ|g_i d_i| for a directional derivative and 0 elementwise.
double gradient_error(double analytic, double numeric, double terms = 0.0);

/// Compares reverse-mode gradients against central differences
/// (f(θ+ε) − f(θ−ε)) / 2ε for every element of every non-excluded parameter.
/// Throws std::invalid_argument for eps outside (0, 1e-2] and
/// std::runtime_error if two evaluations at the same point disagree.
FiniteDifferenceResult finite_difference_check(const ScalarFn& fn, const ParameterStore& params,
                                               const FiniteDifferenceOptions& options = {});

}  // namespace dml
