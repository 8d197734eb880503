#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "srelu/models.hpp"
#include "srelu/tape.hpp"
#include "srelu/tensor.hpp"

SRELU_NAMESPACE_BEGIN

/// Differentiable classifier: maps a batch to N×C logits, recording on the
/// tape when the batch requires a gradient.
using LogitFn = std::function<Tensor(const Tensor& batch, Tape* tape)>;

/// Eval-mode logits of `model`, i.e. at its configured test activation and
/// slope. The model is captured by value.
LogitFn eval_logits(const Model& model);

enum class AttackKind {
  FGSM,
  FGSMTargeted,
  BIM,
  RFGSM,
  StepLL,
  PGD,
  DeepFool,
  GaussianNoise,
  SaltPepper,
};

std::string_view attack_name(AttackKind kind);
AttackKind parse_attack(std::string_view name);
/// Whether the attack keeps max|x_adv - x| <= epsilon.
bool is_linf_bounded(AttackKind kind);

/// Valid pixel interval; attack outputs are clipped into it. Only inputs
/// rescaled without clipping use anything other than [0, 1].
struct PixelBox {
  Real lo = 0;
  Real hi = 1;
};

struct AttackConfig {
  AttackKind kind = AttackKind::FGSM;
  double epsilon = 0;  // L∞ budget; noise scale for GaussianNoise, fraction for SaltPepper
  int steps = 1;       // iterations (BIM/PGD) or max iterations (DeepFool)
  double step_size = 0;
  bool targeted = false;
  std::optional<int> target_class;
  std::uint64_t rng_seed = 0;
  double overshoot = 0.02;
  bool random_start = true;
  double alpha_noise = 0;  // RFGSM random step
  PixelBox box{};

  /// Conventional settings for `kind` at budget `epsilon`: BIM 10 steps of
  /// epsilon/10, PGD 40 steps of 2.5·epsilon/40 with random start, RFGSM
  /// noise step epsilon/2, DeepFool overshoot 0.02 (epsilon is then read as
  /// the iteration count).
  static AttackConfig defaults(AttackKind kind, double epsilon);
  /// Throws ConfigError when the configuration violates its constraints.
  void validate(std::size_t num_classes = 10) const;
};

struct AdversarialBatch {
  Tensor images;
  std::vector<double> linf;  // per image max|x_adv - x|
  std::vector<std::uint8_t> success;
  std::vector<int> predictions;  // argmax of the attacked model on `images`
  // DeepFool only: L2 norm of the accumulated step before overshoot and
  // clipping, and the number of iterations taken.
  std::vector<double> l2_perturbation;
  std::vector<int> iterations;
};

/// Gradient of the mean cross-entropy of `fn` at `images` w.r.t. the images.
Tensor loss_input_gradient(const LogitFn& fn, const Tensor& images, std::span<const int> labels);

// `first_index` is the position of images[0] in the full evaluation set.
// Per-image random streams are seeded from rng_seed ^ (first_index + i), so
// partitioning a set into batches does not change any image's noise.

/// clip(x + ε·sign(∇ₓJ(x, y))), sign(0) = 0.
AdversarialBatch fgsm(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                      double epsilon, PixelBox box = {});

/// clip(x - ε·sign(∇ₓJ(x, target))).
AdversarialBatch fgsm_targeted(const LogitFn& fn, const Tensor& images, int target_class,
                               double epsilon, PixelBox box = {});

/// Iterated sign steps, each projected onto the ε-ball around x and the box.
AdversarialBatch bim(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                     double epsilon, int steps, double step_size, PixelBox box = {});

/// Random sign step of size alpha_noise, then a gradient sign step of
/// ε - alpha_noise taken from the noisy point.
AdversarialBatch rfgsm(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                       double epsilon, double alpha_noise, std::uint64_t seed,
                       std::size_t first_index = 0, PixelBox box = {});

/// Targeted step toward the least-likely class (row argmin of the logits,
/// ties to the lowest index). `labels` only determine the success flags.
AdversarialBatch stepll(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                        double epsilon, PixelBox box = {});

/// Optional uniform start in the ε-ball followed by projected sign steps.
AdversarialBatch pgd(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                     double epsilon, int steps, double step_size, bool random_start,
                     std::uint64_t seed, std::size_t first_index = 0, PixelBox box = {});

/// Multiclass DeepFool in L2. Success means the predicted label changed.
AdversarialBatch deepfool(const LogitFn& fn, const Tensor& images, int max_iters,
                          double overshoot, PixelBox box = {});

/// clip(x + ε·n) with n standard normal per pixel.
AdversarialBatch gaussian_noise_attack(const Tensor& images, double epsilon, std::uint64_t seed,
                                       std::size_t first_index = 0, PixelBox box = {});

/// Sets floor(fraction·H·W) randomly chosen pixel locations per image (all
/// channels) to the box minimum or maximum with equal probability.
AdversarialBatch salt_pepper_attack(const Tensor& images, double fraction, std::uint64_t seed,
                                    std::size_t first_index = 0, PixelBox box = {});

/// Dispatches on config.kind. Success flags of untargeted attacks compare
/// against `labels`; targeted ones against the target class.
AdversarialBatch run_attack(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                            const AttackConfig& config, std::size_t first_index = 0);

SRELU_NAMESPACE_END
