#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "srelu/ops.hpp"
#include "srelu/tape.hpp"
#include "srelu/tensor.hpp"

SRELU_NAMESPACE_BEGIN

enum class ArchitectureId { MnistCnn, Cifar10Cnn1, Cifar10Cnn2, Custom };

std::string_view architecture_name(ArchitectureId id);
/// Accepts "mnist", "cifar10-cnn1", "cifar10-cnn2" and the canonical names.
ArchitectureId parse_architecture(std::string_view name);

struct LayerSpec {
  enum class Kind { Conv, Pool, Dense, Activation };
  Kind kind;
  std::string name;  // parameter prefix for Conv/Dense layers
  std::size_t in = 0, out = 0;
  std::size_t kernel = 0;  // Conv: square kernel side; Pool: window
  std::size_t stride = 1;

  static LayerSpec conv(std::string name, std::size_t in, std::size_t out, std::size_t kernel);
  static LayerSpec pool(std::size_t window);
  static LayerSpec dense(std::string name, std::size_t in, std::size_t out);
  static LayerSpec activation();
};

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in;
};

/// Ordered layer list plus the per-image input shape. Inputs are flattened
/// right before the first dense layer.
struct ArchitectureSpec {
  ArchitectureId id = ArchitectureId::Custom;
  std::vector<LayerSpec> layers;
  Shape input_shape;  // per image, e.g. {1, 28, 28}
  std::size_t num_classes = 10;

  static ArchitectureSpec get(ArchitectureId id);
  std::vector<ParamSpec> parameters() const;
  std::size_t activation_sites() const;
  /// Width of the activations entering the final dense layer.
  std::size_t penultimate_width() const;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};
using ParameterSet = std::vector<NamedTensor>;

const Tensor& find_parameter(const ParameterSet& params, std::string_view name);

/// Activation used during training and the one substituted at test time.
struct SlopeConfig {
  Real train_slope = 1;
  Real test_slope = 1;
  ActivationKind test_activation = ActivationKind::SReLU;
};

enum class Mode { Train, Eval };

class Model {
 public:
  Model(ArchitectureSpec spec, ParameterSet params, SlopeConfig slopes = {});

  const ArchitectureSpec& spec() const { return spec_; }
  const ParameterSet& params() const { return params_; }
  const SlopeConfig& slopes() const { return slopes_; }

  Model with_test_slope(Real slope) const;
  Model with_test_activation(ActivationKind kind, Real slope = 1) const;
  Model with_train_slope(Real slope) const;
  Model with_params(ParameterSet params) const;

 private:
  ArchitectureSpec spec_;
  ParameterSet params_;
  SlopeConfig slopes_;
};

/// Parameters drawn uniformly from ±1/sqrt(fan_in), deterministic per seed.
Model build_model(const ArchitectureSpec& spec, std::uint64_t seed);
Model build_model(ArchitectureId id, std::uint64_t seed);

/// N×classes logits. Eval mode applies the test activation and slope at every
/// activation site; train mode uses SReLU at the training slope. Recorded on
/// `tape` whenever the batch or a parameter requires a gradient.
Tensor forward_logits(const Model& model, const Tensor& batch, Mode mode, Tape* tape = nullptr);

/// Eval-mode argmax per image; ties resolve to the lowest class index.
std::vector<int> predict_classes(const Model& model, const Tensor& batch);

/// Eval-mode activations entering the final dense layer, N×width.
Tensor penultimate_features(const Model& model, const Tensor& batch);

// Parameter file: little-endian "SRLU", u32 version, u32 tensor count, then per
// tensor u32 name length, name bytes, u32 rank, u32 dims, float32 values.
inline constexpr std::uint32_t kParamFileVersion = 1;

void save_params(const Model& model, const std::filesystem::path& path);
std::vector<unsigned char> encode_params(const ParameterSet& params);
/// Throws FormatError on bad magic/version or truncation and ShapeError,
/// naming the tensor, when the file does not match `spec`.
Model load_params(const std::filesystem::path& path, const ArchitectureSpec& spec);
ParameterSet decode_params(std::span<const unsigned char> bytes, const ArchitectureSpec& spec);

SRELU_NAMESPACE_END
