#pragma once

#include <random>
#include <vector>

#include "srelu/attacks.hpp"
#include "srelu/data.hpp"
#include "srelu/models.hpp"
#include "srelu/ops.hpp"
#include "srelu/tensor.hpp"

namespace testing {

using namespace srelu;

inline Tensor make(Shape shape, std::vector<double> values, bool grad = false) {
  return Tensor(std::move(shape), std::vector<Real>(values.begin(), values.end()), grad);
}

inline std::vector<double> as_doubles(const Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Real>(d(rng));
  return Tensor(std::move(shape), std::move(v));
}

/// Logits x·W + b of a linear classifier on N×F inputs.
inline LogitFn linear_logits(Tensor weights, Tensor bias) {
  return [weights, bias](const Tensor& x, Tape* tape) {
    Tensor flat = x.rank() == 2 ? x : ops::reshape(x, {x.dim(0), x.numel() / x.dim(0)}, tape);
    return ops::dense(flat, weights, bias, tape);
  };
}

/// Conv, activation, pool, dense, activation, dense on 1×6×6 images with ten
/// classes: small enough for exhaustive experiment tests.
inline ArchitectureSpec small_spec() {
  ArchitectureSpec s;
  s.input_shape = {1, 6, 6};
  s.num_classes = 10;
  s.layers = {LayerSpec::conv("conv", 1, 3, 3), LayerSpec::activation(), LayerSpec::pool(2),
              LayerSpec::dense("fc1", 12, 8),   LayerSpec::activation(), LayerSpec::dense("fc2", 8, 10)};
  return s;
}

/// Class c lights up pixel 3c+1 of a noisy 6×6 image, so the task is learnable.
inline LabeledImageSet synthetic_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0, 0.3);
  std::vector<Real> px(n * 36);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(rng() % 10);
    for (std::size_t j = 0; j < 36; ++j) px[i * 36 + j] = static_cast<Real>(noise(rng));
    px[i * 36 + 3 * static_cast<std::size_t>(labels[i]) + 1] = Real(1);
  }
  return {"synthetic", Tensor({n, 1, 6, 6}, px), labels};
}

}  // namespace testing
