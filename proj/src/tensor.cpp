#include "srelu/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

TensorId next_tensor_id() {
  static std::atomic<TensorId> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor()
    : data_(std::make_shared<const std::vector<Real>>(1, Real{0})),
      id_(next_tensor_id()) {}

Tensor::Tensor(Shape shape, std::vector<Real> values, bool requires_grad)
    : shape_(std::move(shape)), id_(next_tensor_id()), requires_grad_(requires_grad) {
  if (shape_numel(shape_) != values.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " needs " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(values.size()));
  }
  data_ = std::make_shared<const std::vector<Real>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), Real{0}); }

Tensor Tensor::full(Shape shape, Real value) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::scalar(Real value) { return Tensor({}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[axis];
}

Real Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
  }
  return (*data_)[0];
}

Tensor Tensor::requiring_grad() const {
  Tensor t = *this;
  t.id_ = next_tensor_id();
  t.requires_grad_ = true;
  return t;
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.id_ = next_tensor_id();
  t.requires_grad_ = false;
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  t.id_ = next_tensor_id();
  t.requires_grad_ = false;
  return t;
}

bool Tensor::all_finite() const {
  for (auto v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::same_values(const Tensor& other) const {
  return shape_ == other.shape_ && *data_ == *other.data_;
}

SRELU_NAMESPACE_END
