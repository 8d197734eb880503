#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "srelu/config.hpp"

SRELU_NAMESPACE_BEGIN

using Shape = std::vector<std::size_t>;
using TensorId = std::uint64_t;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of reals.
///
/// Values are immutable once the tensor is constructed, so copies share
/// storage and are safe to read from several threads. Every tensor carries a
/// process-unique id; gradients are keyed by that id, which makes a derived
/// handle (`requiring_grad`, `detached`) a distinct node of the graph even
/// though it shares storage with its source.
class Tensor {
 public:
  /// Rank-0 tensor holding 0.
  Tensor();
  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Real value);
  static Tensor scalar(Real value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data_->size(); }

  std::span<const Real> values() const { return *data_; }
  const Real* data() const { return data_->data(); }
  Real operator[](std::size_t i) const { return (*data_)[i]; }
  /// Value of a single-element tensor.
  Real item() const;
  std::vector<Real> to_vector() const { return *data_; }

  TensorId id() const { return id_; }
  bool requires_grad() const { return requires_grad_; }

  /// Same storage, fresh identity, marked as a gradient leaf.
  Tensor requiring_grad() const;
  /// Same storage, fresh identity, no gradient tracking.
  Tensor detached() const;
  /// Same storage under a different shape of equal size. Not recorded on any
  /// tape; use ops::reshape inside differentiated code.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  bool same_values(const Tensor& other) const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<Real>> data_;
  TensorId id_;
  bool requires_grad_ = false;
};

SRELU_NAMESPACE_END
