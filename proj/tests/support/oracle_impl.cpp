// Compiled once per library precision; see oracle.hpp.

#include <stdexcept>

#include "oracle.hpp"
#include "srelu/models.hpp"
#include "srelu/ops.hpp"

#ifdef SRELU_USE_DOUBLE
#define ORACLE_NS f64
#else
#define ORACLE_NS f32
#endif

namespace oracle::ORACLE_NS {

namespace {

using srelu::Real;
using srelu::Shape;
using srelu::Tape;
using srelu::Tensor;
namespace ops = srelu::ops;

std::vector<Tensor> unpack(const Case& c, const std::vector<double>& flat, bool track) {
  std::vector<Tensor> out;
  std::size_t pos = 0;
  for (const auto& s : c.shapes) {
    const std::size_t n = srelu::shape_numel(s);
    std::vector<Real> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<Real>(flat.at(pos + i));
    pos += n;
    out.emplace_back(Shape(s), std::move(v), track);
  }
  if (pos != flat.size()) throw std::invalid_argument("oracle: flat input size mismatch");
  return out;
}

Tensor weighted(const Tensor& y, const Case& c, Tape* tape) {
  std::vector<Real> w(c.coeffs.begin(), c.coeffs.end());
  return ops::weighted_sum(y, w, tape);
}

srelu::Model mnist_model(const std::vector<Tensor>& in) {
  auto spec = srelu::ArchitectureSpec::get(srelu::ArchitectureId::MnistCnn);
  srelu::ParameterSet params;
  const auto specs = spec.parameters();
  for (std::size_t i = 0; i < specs.size(); ++i) params.push_back({specs[i].name, in[i + 1]});
  return srelu::Model(spec, params);
}

Tensor loss(const Case& c, const std::vector<Tensor>& in, Tape* tape) {
  const auto& op = c.op;
  if (op == "conv2d") return weighted(ops::conv2d(in[0], in[1], in[2], c.stride, tape), c, tape);
  if (op == "maxpool2d") return weighted(ops::maxpool2d(in[0], c.window, c.stride, tape), c, tape);
  if (op == "dense") return weighted(ops::dense(in[0], in[1], in[2], tape), c, tape);
  if (op == "srelu") return weighted(ops::srelu(in[0], static_cast<Real>(c.slope), tape), c, tape);
  if (op == "softmax_cross_entropy") return ops::softmax_cross_entropy(in[0], c.labels, tape);
  if (op == "soft_cross_entropy") {
    Tensor target(Shape(c.shapes[0]), std::vector<Real>(c.aux.begin(), c.aux.end()));
    return ops::soft_cross_entropy(in[0], target, tape);
  }
  if (op == "reshape") {
    Shape s{c.shapes[0][0], srelu::shape_numel(c.shapes[0]) / c.shapes[0][0]};
    return weighted(ops::reshape(in[0], s, tape), c, tape);
  }
  if (op == "sum") return ops::sum(in[0], tape);
  if (op == "weighted_sum") return weighted(in[0], c, tape);
  if (op == "mnist_cnn_loss") {
    auto model = mnist_model(in);
    return ops::softmax_cross_entropy(srelu::forward_logits(model, in[0], srelu::Mode::Train, tape),
                                      c.labels, tape);
  }
  // Remaining names are activation kinds.
  return weighted(ops::activation(in[0], srelu::parse_activation(op), tape), c, tape);
}

}  // namespace

double evaluate(const Case& c, const std::vector<double>& flat) {
  return static_cast<double>(loss(c, unpack(c, flat, false), nullptr).item());
}

std::vector<double> gradient(const Case& c, const std::vector<double>& flat) {
  auto in = unpack(c, flat, true);
  Tape tape;
  Tensor l = loss(c, in, &tape);
  auto grads = tape.backward(l);
  std::vector<double> out;
  for (const auto& t : in) {
    const Tensor g = grads.get(t);
    for (auto v : g.values()) out.push_back(static_cast<double>(v));
  }
  return out;
}

}  // namespace oracle::ORACLE_NS
