#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srelu/attacks.hpp"
#include "srelu/data.hpp"
#include "srelu/models.hpp"

SRELU_NAMESPACE_BEGIN

/// Worker pool settings. Images are processed in fixed chunks of
/// `chunk_images`, so results do not depend on `threads`.
struct ExecutionOptions {
  unsigned threads = 1;
  std::size_t chunk_images = 250;
};

// ---------------------------------------------------------------- training

struct TrainConfig {
  int epochs = 5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  Real train_slope = 1;  // >1 only for the same-slope control run
};

struct TrainLogRow {
  int epoch = 0;
  std::size_t steps = 0;
  double mean_loss = 0;
  double train_accuracy = 0;  // on the shuffled minibatches seen in the epoch
};

struct TrainResult {
  Model model;
  std::vector<TrainLogRow> log;
};

/// Minibatch SGD with momentum on softmax cross-entropy, in train mode at
/// config.train_slope. Batches are reshuffled each epoch from (seed, epoch).
TrainResult train(const Model& initial, const LabeledImageSet& set, const TrainConfig& config);

/// Fresh model from `seed`, then train().
TrainResult train_from_scratch(const ArchitectureSpec& spec, const LabeledImageSet& set,
                               const TrainConfig& config);

/// Distils `teacher` (evaluated at slope 1) into a fresh slope-1 model of the
/// same architecture, minimising the cross-entropy between the student's
/// softmax and the teacher's softmax.
TrainResult bpda_train_substitute(const Model& teacher, const LabeledImageSet& set,
                                  const TrainConfig& config);

std::string train_log_csv(const std::vector<TrainLogRow>& log);

// ---------------------------------------------------------------- reports

struct EvalRecord {
  std::string dataset;
  std::string model;
  std::string activation;
  double train_slope = 1;
  double test_slope = 1;
  std::string attack;
  bool targeted = false;
  std::optional<int> target_class;
  double epsilon = 0;  // DeepFool: iteration budget
  int steps = 1;
  std::size_t n_images = 0;
  double clean_acc = 0;
  double adv_acc = 0;
  double attack_success = 0;
  std::uint64_t seed = 0;
};

struct Report {
  std::vector<EvalRecord> records;
  std::vector<std::pair<std::string, std::string>> metadata;

  void append(const Report& other);
};

inline constexpr const char* kReportHeader =
    "dataset,model,activation,train_slope,test_slope,attack,targeted,target_class,epsilon,steps,"
    "n_images,clean_acc,adv_acc,attack_success,seed";

/// Sorts records by (dataset, model, activation, train_slope, test_slope,
/// attack, target_class, epsilon) and throws std::logic_error on duplicates.
void normalize(Report& report);
/// Header plus one line per record, floats with 6 significant digits.
std::string report_csv(const Report& report);

/// Per (dataset, model, activation, slopes, attack) means over the epsilon
/// grid (and target classes). The canonical mean excludes epsilon = 0; the
/// `_with_eps0` columns include it. Recovery is the mean at this slope minus
/// the mean at test slope 1 of the same group, empty when no slope-1 row.
struct SummaryRow {
  std::string dataset, model, activation, attack;
  double train_slope = 1, test_slope = 1;
  std::size_t cells = 0;
  double mean_adv_acc = 0, mean_adv_acc_with_eps0 = 0;
  double mean_attack_success = 0, mean_attack_success_with_eps0 = 0;
  std::optional<double> recovery, recovery_with_eps0;
};

std::vector<SummaryRow> summarize(const Report& report);
std::string summary_csv(const std::vector<SummaryRow>& rows);

// ---------------------------------------------------------------- evaluation

/// Fraction of correct eval-mode predictions. Throws on an empty set.
double eval_clean(const Model& model, const LabeledImageSet& set, const ExecutionOptions& exec = {});

/// Untargeted: adv_acc is the fraction still correct and attack_success the
/// fraction of originally correct images that become misclassified.
/// Targeted: attack_success is the fraction of images not already predicted
/// as the target that end up predicted as it.
EvalRecord eval_under_attack(const Model& model, const LabeledImageSet& set,
                             const AttackConfig& config, const ExecutionOptions& exec = {});

struct SweepGrid {
  std::vector<double> slopes{0.5, 1, 2, 5, 10, 100};
  std::vector<double> epsilons;
  std::vector<AttackKind> attacks{AttackKind::FGSM};
  std::vector<int> deepfool_iterations{1, 2, 5, 10, 20, 50};
  std::optional<std::size_t> image_budget;  // first N test images, all when empty
  std::uint64_t seed = 0;

  /// {0, 0.05, ..., 0.3} for MNIST-shaped data, {0, 0.02, ..., 0.1} otherwise.
  static std::vector<double> default_epsilons(bool mnist);
  /// Throws ConfigError unless slopes are positive, epsilons ascend from 0
  /// and attacks is nonempty.
  void validate() const;
};

/// Cross product of slopes × attacks × epsilons (iteration budgets for
/// DeepFool) on a model trained at slope 1.
Report slope_sweep(const Model& model, const LabeledImageSet& set, const SweepGrid& grid,
                   const ExecutionOptions& exec = {});

/// Targeted FGSM for every class × slope × epsilon.
Report targeted_sweep(const Model& model, const LabeledImageSet& set, const SweepGrid& grid,
                      const ExecutionOptions& exec = {});

/// FGSM over the epsilon grid with each activation substituted at every site.
Report activation_swap(const Model& model, const LabeledImageSet& set,
                       const std::vector<ActivationKind>& kinds, const SweepGrid& grid,
                       const ExecutionOptions& exec = {});

/// FGSM at slope 1 on inputs multiplied by each factor. Without clipping the
/// attack box widens to [0, max(1, factor)] so the scaled pixels survive the
/// attack's own clip. Records carry "<dataset>_x<factor>_clip|noclip".
Report scaling_experiment(const Model& model, const LabeledImageSet& set,
                          const std::vector<double>& factors, bool clip, const SweepGrid& grid,
                          const ExecutionOptions& exec = {});

/// Crafts each grid attack on `substitute` (slope 1) and scores the images on
/// `original` at every grid slope. Attack names are prefixed with "bpda_".
Report bpda_transfer_eval(const Model& original, const Model& substitute,
                          const LabeledImageSet& set, const SweepGrid& grid,
                          const ExecutionOptions& exec = {});

/// One line per image: label, then the penultimate features at the model's
/// configured test activation. No header.
std::string features_csv(const Model& model, const LabeledImageSet& set,
                         const ExecutionOptions& exec = {});
void export_features(const Model& model, const LabeledImageSet& set,
                     const std::filesystem::path& path, const ExecutionOptions& exec = {});

void write_text_file(const std::filesystem::path& path, const std::string& text);

SRELU_NAMESPACE_END
