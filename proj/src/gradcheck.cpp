#include "srelu/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

// Central difference along element i of `base`, which is restored afterwards.
double central_difference(const ScalarFn& f, const Shape& shape, std::vector<Real>& base,
                          std::size_t i, double step) {
  const Real orig = base[i];
  base[i] = static_cast<Real>(orig + step);
  const Real up = base[i];
  const double f_plus = f(Tensor(shape, base));
  base[i] = static_cast<Real>(orig - step);
  const Real down = base[i];
  const double f_minus = f(Tensor(shape, base));
  base[i] = orig;
  // Divide by the step actually taken after rounding to Real.
  return (f_plus - f_minus) / (static_cast<double>(up) - static_cast<double>(down));
}

}  // namespace

Tensor finite_difference_gradient(const ScalarFn& f, const Tensor& x, double step) {
  std::vector<Real> base = x.to_vector();
  std::vector<Real> grad(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    grad[i] = static_cast<Real>(central_difference(f, x.shape(), base, i, step));
  }
  return Tensor(x.shape(), std::move(grad));
}

GradientComparison compare_with_finite_differences(const ScalarFn& f, const Tensor& x,
                                                   const Tensor& analytic, double step,
                                                   double kink_tolerance) {
  std::vector<std::size_t> all(x.numel());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return compare_with_finite_differences(f, x, analytic, step, kink_tolerance, all);
}

GradientComparison compare_with_finite_differences(const ScalarFn& f, const Tensor& x,
                                                   const Tensor& analytic, double step,
                                                   double kink_tolerance,
                                                   std::span<const std::size_t> indices) {
  if (analytic.shape() != x.shape()) {
    throw ShapeError("gradient shape " + shape_to_string(analytic.shape()) +
                     " differs from input shape " + shape_to_string(x.shape()));
  }
  std::vector<Real> base = x.to_vector();
  std::vector<double> fd(indices.size()), fd_half(indices.size());
  double scale = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= base.size()) throw std::out_of_range("gradient check index outside the tensor");
    fd[k] = central_difference(f, x.shape(), base, i, step);
    fd_half[k] = central_difference(f, x.shape(), base, i, step / 2);
    scale = std::max({scale, std::abs(fd[k]), std::abs(double(analytic[i]))});
  }
  GradientComparison out;
  double max_diff = 0, max_mag = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double a = analytic[indices[k]];
    // Estimates that move with the step size straddle a kink.
    if (std::abs(fd[k] - fd_half[k]) > kink_tolerance * std::max(scale, 1e-12)) {
      ++out.excluded;
      continue;
    }
    ++out.compared;
    max_diff = std::max(max_diff, std::abs(a - fd[k]));
    max_mag = std::max({max_mag, std::abs(a), std::abs(fd[k])});
  }
  out.relative_error = max_mag > 0 ? max_diff / max_mag : max_diff;
  return out;
}

SRELU_NAMESPACE_END
