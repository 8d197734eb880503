#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srelu/tape.hpp"
#include "srelu/tensor.hpp"

SRELU_NAMESPACE_BEGIN

/// Elementwise nonlinearities available at an activation site.
enum class ActivationKind { SReLU, Sigmoid, Tanh, LeakyReLU, ELU, Softplus, Identity };

inline constexpr Real kLeakyReluSlope = Real(0.01);
inline constexpr Real kEluAlpha = Real(1.0);

std::string_view activation_name(ActivationKind kind);
/// Throws ConfigError on an unknown name.
ActivationKind parse_activation(std::string_view name);

namespace ops {

// Every op below records itself on `tape` when the tape is non-null and at
// least one operand requires a gradient; otherwise it is a plain evaluation.

/// Valid (unpadded) 2-D cross-correlation. input N×C×H×W, weights O×C×Kh×Kw,
/// bias O. Output N×O×((H-Kh)/stride+1)×((W-Kw)/stride+1).
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride, Tape* tape = nullptr);

/// Max over window×window cells. The reverse pass routes each output gradient
/// to the first maximal input in row-major scan order.
Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride,
                 Tape* tape = nullptr);

/// input N×F times weights F×G plus bias G.
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias,
             Tape* tape = nullptr);

/// slope·max(0, x). Derivative is `slope` for x > 0 and 0 for x <= 0.
Tensor srelu(const Tensor& input, Real slope, Tape* tape = nullptr);

/// Applies `kind`; `slope` is only read for SReLU.
Tensor activation(const Tensor& input, ActivationKind kind, Tape* tape = nullptr,
                  Real slope = Real(1));

/// Mean over rows of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             Tape* tape = nullptr);

/// Mean over rows of -sum_c targets[c] * log softmax(logits)[c]. Targets are
/// constants (no gradient flows into them).
Tensor soft_cross_entropy(const Tensor& logits, const Tensor& target_probs,
                          Tape* tape = nullptr);

Tensor reshape(const Tensor& input, Shape shape, Tape* tape = nullptr);
Tensor sum(const Tensor& input, Tape* tape = nullptr);
/// sum_i coeffs[i]·input[i] with constant coefficients of the same size.
Tensor weighted_sum(const Tensor& input, std::span<const Real> coeffs, Tape* tape = nullptr);

}  // namespace ops

// Untracked helpers over N×C score matrices.
Tensor softmax_rows(const Tensor& logits);
/// Row argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);
/// Row argmin; ties resolve to the lowest index.
std::vector<int> argmin_rows(const Tensor& logits);

SRELU_NAMESPACE_END
