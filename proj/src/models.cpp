#include "srelu/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

std::string_view architecture_name(ArchitectureId id) {
  switch (id) {
    case ArchitectureId::MnistCnn: return "MNIST_CNN";
    case ArchitectureId::Cifar10Cnn1: return "CIFAR10_CNN1";
    case ArchitectureId::Cifar10Cnn2: return "CIFAR10_CNN2";
    case ArchitectureId::Custom: return "CUSTOM";
  }
  return "CUSTOM";
}

ArchitectureId parse_architecture(std::string_view name) {
  if (name == "mnist" || name == "MNIST_CNN") return ArchitectureId::MnistCnn;
  if (name == "cifar10-cnn1" || name == "CIFAR10_CNN1") return ArchitectureId::Cifar10Cnn1;
  if (name == "cifar10-cnn2" || name == "CIFAR10_CNN2") return ArchitectureId::Cifar10Cnn2;
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (expected mnist, cifar10-cnn1 or cifar10-cnn2)");
}

LayerSpec LayerSpec::conv(std::string name, std::size_t in, std::size_t out, std::size_t kernel) {
  return {Kind::Conv, std::move(name), in, out, kernel, 1};
}
LayerSpec LayerSpec::pool(std::size_t window) { return {Kind::Pool, "", 0, 0, window, window}; }
LayerSpec LayerSpec::dense(std::string name, std::size_t in, std::size_t out) {
  return {Kind::Dense, std::move(name), in, out, 0, 1};
}
LayerSpec LayerSpec::activation() { return {Kind::Activation, "", 0, 0, 0, 1}; }

ArchitectureSpec ArchitectureSpec::get(ArchitectureId id) {
  using L = LayerSpec;
  ArchitectureSpec s;
  s.id = id;
  switch (id) {
    case ArchitectureId::MnistCnn:
      s.input_shape = {1, 28, 28};
      s.layers = {L::conv("conv1", 1, 10, 5), L::pool(2), L::activation(),
                  L::conv("conv2", 10, 20, 5), L::pool(2), L::activation(),
                  L::dense("fc1", 320, 50),    L::activation(),
                  L::dense("fc2", 50, 10)};
      return s;
    case ArchitectureId::Cifar10Cnn1:
      s.input_shape = {3, 32, 32};
      s.layers = {L::conv("conv1", 3, 6, 5),  L::activation(), L::pool(2),
                  L::conv("conv2", 6, 16, 5), L::activation(), L::pool(2),
                  L::dense("fc1", 400, 120),  L::activation(),
                  L::dense("fc2", 120, 84),   L::activation(),
                  L::dense("fc3", 84, 10)};
      return s;
    case ArchitectureId::Cifar10Cnn2:
      s.input_shape = {3, 32, 32};
      s.layers = {L::conv("conv1", 3, 6, 5),  L::pool(2),
                  L::conv("conv2", 6, 16, 5), L::pool(2),
                  L::dense("fc1", 400, 120),  L::activation(),
                  L::dense("fc2", 120, 84),   L::activation(),
                  L::dense("fc3", 84, 10)};
      return s;
    case ArchitectureId::Custom:
      break;
  }
  throw ConfigError("ArchitectureSpec::get: no built-in layout for a custom architecture");
}

std::vector<ParamSpec> ArchitectureSpec::parameters() const {
  std::vector<ParamSpec> out;
  for (const auto& l : layers) {
    if (l.kind == LayerSpec::Kind::Conv) {
      std::size_t fan_in = l.in * l.kernel * l.kernel;
      out.push_back({l.name + ".weight", {l.out, l.in, l.kernel, l.kernel}, fan_in});
      out.push_back({l.name + ".bias", {l.out}, fan_in});
    } else if (l.kind == LayerSpec::Kind::Dense) {
      out.push_back({l.name + ".weight", {l.in, l.out}, l.in});
      out.push_back({l.name + ".bias", {l.out}, l.in});
    }
  }
  return out;
}

std::size_t ArchitectureSpec::activation_sites() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kind == LayerSpec::Kind::Activation;
  return n;
}

std::size_t ArchitectureSpec::penultimate_width() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (it->kind == LayerSpec::Kind::Dense) return it->in;
  }
  throw ConfigError("architecture has no dense layer");
}

const Tensor& find_parameter(const ParameterSet& params, std::string_view name) {
  for (const auto& p : params) {
    if (p.name == name) return p.value;
  }
  throw ShapeError("missing parameter tensor '" + std::string(name) + "'");
}

Model::Model(ArchitectureSpec spec, ParameterSet params, SlopeConfig slopes)
    : spec_(std::move(spec)), params_(std::move(params)), slopes_(slopes) {
  auto expected = spec_.parameters();
  if (expected.size() != params_.size()) {
    throw ShapeError("model expects " + std::to_string(expected.size()) +
                     " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (const auto& e : expected) {
    const Tensor& t = find_parameter(params_, e.name);
    if (t.shape() != e.shape) {
      throw ShapeError("parameter '" + e.name + "' has shape " + shape_to_string(t.shape()) +
                       ", architecture expects " + shape_to_string(e.shape));
    }
  }
  if (!(slopes_.test_slope >= 0) || !(slopes_.train_slope >= 0)) {
    throw ConfigError("activation slopes must be non-negative");
  }
}

Model Model::with_test_slope(Real slope) const {
  SlopeConfig s = slopes_;
  s.test_slope = slope;
  s.test_activation = ActivationKind::SReLU;
  return Model(spec_, params_, s);
}

Model Model::with_test_activation(ActivationKind kind, Real slope) const {
  SlopeConfig s = slopes_;
  s.test_activation = kind;
  s.test_slope = slope;
  return Model(spec_, params_, s);
}

Model Model::with_train_slope(Real slope) const {
  SlopeConfig s = slopes_;
  s.train_slope = slope;
  return Model(spec_, params_, s);
}

Model Model::with_params(ParameterSet params) const { return Model(spec_, std::move(params), slopes_); }

Model build_model(const ArchitectureSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet params;
  for (const auto& p : spec.parameters()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<Real> values(shape_numel(p.shape));
    for (auto& v : values) v = static_cast<Real>(dist(rng));
    params.push_back({p.name, Tensor(p.shape, std::move(values))});
  }
  return Model(spec, std::move(params));
}

Model build_model(ArchitectureId id, std::uint64_t seed) {
  return build_model(ArchitectureSpec::get(id), seed);
}

namespace {

std::size_t trailing_numel(const Tensor& t) {
  std::size_t f = 1;
  for (std::size_t i = 1; i < t.rank(); ++i) f *= t.dim(i);
  return f;
}

Tensor run_layers(const Model& model, const Tensor& batch, Mode mode, Tape* tape,
                  bool stop_before_last_dense) {
  const auto& spec = model.spec();
  if (batch.rank() != spec.input_shape.size() + 1 ||
      !std::equal(spec.input_shape.begin(), spec.input_shape.end(), batch.shape().begin() + 1)) {
    throw ShapeError("batch shape " + shape_to_string(batch.shape()) + " does not match " +
                     std::string(architecture_name(spec.id)) + " input N x " +
                     shape_to_string(spec.input_shape));
  }
  const ActivationKind kind =
      mode == Mode::Eval ? model.slopes().test_activation : ActivationKind::SReLU;
  const Real slope = mode == Mode::Eval ? model.slopes().test_slope : model.slopes().train_slope;

  std::size_t last_dense = spec.layers.size();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerSpec::Kind::Dense) last_dense = i;
  }

  const std::size_t n = batch.dim(0);
  Tensor x = batch;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (stop_before_last_dense && i == last_dense) break;
    switch (l.kind) {
      case LayerSpec::Kind::Conv:
        x = ops::conv2d(x, find_parameter(model.params(), l.name + ".weight"),
                        find_parameter(model.params(), l.name + ".bias"), l.stride, tape);
        break;
      case LayerSpec::Kind::Pool:
        x = ops::maxpool2d(x, l.kernel, l.stride, tape);
        break;
      case LayerSpec::Kind::Activation:
        x = ops::activation(x, kind, tape, slope);
        break;
      case LayerSpec::Kind::Dense:
        if (x.rank() != 2) x = ops::reshape(x, {n, trailing_numel(x)}, tape);
        x = ops::dense(x, find_parameter(model.params(), l.name + ".weight"),
                       find_parameter(model.params(), l.name + ".bias"), tape);
        break;
    }
  }
  if (x.rank() != 2) x = ops::reshape(x, {n, trailing_numel(x)}, tape);
  return x;
}

}  // namespace

Tensor forward_logits(const Model& model, const Tensor& batch, Mode mode, Tape* tape) {
  return run_layers(model, batch, mode, tape, false);
}

std::vector<int> predict_classes(const Model& model, const Tensor& batch) {
  return argmax_rows(forward_logits(model, batch, Mode::Eval));
}

Tensor penultimate_features(const Model& model, const Tensor& batch) {
  return run_layers(model, batch, Mode::Eval, nullptr, true);
}

SRELU_NAMESPACE_END
