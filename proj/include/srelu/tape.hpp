#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "srelu/tensor.hpp"

SRELU_NAMESPACE_BEGIN

/// Accumulated gradients keyed by tensor identity.
class GradientMap {
 public:
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  /// Gradient of `t`, or zeros of its shape when `t` was not reached.
  Tensor get(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

  /// Zero-initialised on first use; stays valid while the map lives.
  std::span<Real> accumulator(TensorId id, const Shape& shape);
  const std::vector<Real>* find(TensorId id) const;

 private:
  struct Entry {
    Shape shape;
    std::vector<Real> values;
  };
  std::unordered_map<TensorId, Entry> grads_;
};

/// Reverse-pass rule of one recorded operation. `grad_inputs[i]` is null when
/// input i does not need a gradient; otherwise the rule adds its contribution
/// into that buffer.
using BackwardFn =
    std::function<void(std::span<const Real> grad_output, std::span<Real* const> grad_inputs)>;

/// Ordered record of differentiable operations.
///
/// Operations are appended in execution order, which is already a topological
/// order of the graph. A tape is used by one thread at a time.
class Tape {
 public:
  void record(const Tensor& output, std::span<const Tensor> inputs, BackwardFn rule);
  std::size_t size() const { return entries_.size(); }

  /// Gradients of a scalar `loss` with respect to every tracked tensor that
  /// contributes to it, including gradient leaves such as network inputs.
  GradientMap backward(const Tensor& loss) const;

 private:
  struct Input {
    TensorId id;
    Shape shape;
    bool requires_grad;
  };
  struct Entry {
    TensorId output;
    std::vector<Input> inputs;
    BackwardFn rule;
  };
  std::vector<Entry> entries_;
};

/// Whether an op over `inputs` must be recorded on `tape`.
bool is_tracked(const Tape* tape, std::initializer_list<const Tensor*> inputs);

SRELU_NAMESPACE_END
