#include "srelu/tape.hpp"

#include <stdexcept>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

Tensor GradientMap::get(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) return Tensor::zeros(t.shape());
  return Tensor(t.shape(), it->second.values);
}

std::span<Real> GradientMap::accumulator(TensorId id, const Shape& shape) {
  auto [it, inserted] = grads_.try_emplace(id);
  if (inserted) {
    it->second.shape = shape;
    it->second.values.assign(shape_numel(shape), Real{0});
  }
  return it->second.values;
}

const std::vector<Real>* GradientMap::find(TensorId id) const {
  auto it = grads_.find(id);
  return it == grads_.end() ? nullptr : &it->second.values;
}

void Tape::record(const Tensor& output, std::span<const Tensor> inputs, BackwardFn rule) {
  Entry e{output.id(), {}, std::move(rule)};
  e.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    e.inputs.push_back({in.id(), in.shape(), in.requires_grad()});
  }
  entries_.push_back(std::move(e));
}

GradientMap Tape::backward(const Tensor& loss) const {
  if (loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     shape_to_string(loss.shape()));
  }
  bool on_tape = false;
  for (const auto& e : entries_) {
    if (e.output == loss.id()) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) throw std::invalid_argument("backward: loss tensor is not on this tape");

  GradientMap grads;
  grads.accumulator(loss.id(), loss.shape())[0] = Real{1};

  std::vector<Real*> input_buffers;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto* g_out = grads.find(it->output);
    if (g_out == nullptr) continue;
    input_buffers.assign(it->inputs.size(), nullptr);
    for (std::size_t i = 0; i < it->inputs.size(); ++i) {
      const auto& in = it->inputs[i];
      if (in.requires_grad) input_buffers[i] = grads.accumulator(in.id, in.shape).data();
    }
    // accumulator() may insert into the map; the output entry is node-stable.
    it->rule(*g_out, input_buffers);
  }
  return grads;
}

bool is_tracked(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->requires_grad()) return true;
  }
  return false;
}

SRELU_NAMESPACE_END
