#pragma once

#include <functional>
#include <span>

#include "srelu/tensor.hpp"

SRELU_NAMESPACE_BEGIN

using ScalarFn = std::function<double(const Tensor&)>;

/// Central-difference estimate of the gradient of `f` at `x`:
/// (f(x + h·e_i) - f(x - h·e_i)) / 2h for every element i.
/// `f` must be deterministic.
Tensor finite_difference_gradient(const ScalarFn& f, const Tensor& x, double step);

struct GradientComparison {
  /// max_i |a_i - b_i| / max_i max(|a_i|, |b_i|) over the compared elements.
  double relative_error = 0;
  std::size_t compared = 0;
  std::size_t excluded = 0;
};

/// Compares an analytic gradient against a central-difference oracle.
/// Elements where the estimate at `step` and at `step / 2` disagree by more
/// than `kink_tolerance` (relative to the gradient scale) sit within one step
/// of a non-differentiable point and are excluded.
GradientComparison compare_with_finite_differences(const ScalarFn& f, const Tensor& x,
                                                   const Tensor& analytic, double step,
                                                   double kink_tolerance);
/// Same, restricted to the listed flat element indices.
GradientComparison compare_with_finite_differences(const ScalarFn& f, const Tensor& x,
                                                   const Tensor& analytic, double step,
                                                   double kink_tolerance,
                                                   std::span<const std::size_t> indices);

SRELU_NAMESPACE_END
