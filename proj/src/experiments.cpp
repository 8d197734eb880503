#include <algorithm>
#include <cmath>
#include <cstdio>

#include "srelu/errors.hpp"
#include "srelu/experiments.hpp"
#include "srelu/parallel.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

std::vector<int> chunked_predictions(const LogitFn& fn, const LabeledImageSet& set,
                                     const ExecutionOptions& exec) {
  std::vector<int> out(set.size());
  parallel_chunks(set.size(), exec.chunk_images, exec.threads,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    auto pred = argmax_rows(fn(set.image_range(begin, end), nullptr));
                    std::copy(pred.begin(), pred.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
                  });
  return out;
}

// Predictions of `judge` on images crafted against `attacked`.
std::vector<int> adversarial_predictions(const LogitFn& attacked, const LogitFn* judge,
                                         const LabeledImageSet& set, const AttackConfig& config,
                                         const ExecutionOptions& exec) {
  std::vector<int> out(set.size());
  parallel_chunks(set.size(), exec.chunk_images, exec.threads,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    std::span<const int> labels(set.labels.data() + begin, end - begin);
                    auto adv = run_attack(attacked, set.image_range(begin, end), labels, config, begin);
                    auto pred = judge ? argmax_rows((*judge)(adv.images, nullptr)) : adv.predictions;
                    std::copy(pred.begin(), pred.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
                  });
  return out;
}

double fraction(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

EvalRecord score(const Model& model, const LabeledImageSet& set, const AttackConfig& config,
                 const std::vector<int>& clean, const std::vector<int>& adv, std::string attack) {
  std::size_t clean_correct = 0, adv_correct = 0, eligible = 0, hits = 0;
  const int target = config.target_class.value_or(-1);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int y = set.labels[i];
    clean_correct += clean[i] == y;
    adv_correct += adv[i] == y;
    if (config.targeted) {
      if (clean[i] != target) {
        ++eligible;
        hits += adv[i] == target;
      }
    } else if (clean[i] == y) {
      ++eligible;
      hits += adv[i] != y;
    }
  }
  EvalRecord r;
  r.dataset = set.name;
  r.model = std::string(architecture_name(model.spec().id));
  r.activation = std::string(activation_name(model.slopes().test_activation));
  r.train_slope = static_cast<double>(model.slopes().train_slope);
  r.test_slope = static_cast<double>(model.slopes().test_slope);
  r.attack = std::move(attack);
  r.targeted = config.targeted;
  r.target_class = config.target_class;
  r.epsilon = config.kind == AttackKind::DeepFool ? config.steps : config.epsilon;
  r.steps = config.steps;
  r.n_images = set.size();
  r.clean_acc = fraction(clean_correct, set.size());
  r.adv_acc = fraction(adv_correct, set.size());
  r.attack_success = fraction(hits, eligible);
  r.seed = config.rng_seed;
  return r;
}

// The grid's image budget applied to `set`.
LabeledImageSet budgeted(const LabeledImageSet& set, const SweepGrid& grid) {
  if (!grid.image_budget || *grid.image_budget >= set.size()) return set;
  return take_first(set, *grid.image_budget);
}

std::vector<AttackConfig> configs_for(AttackKind kind, const SweepGrid& grid) {
  std::vector<AttackConfig> out;
  if (kind == AttackKind::DeepFool) {
    for (int iters : grid.deepfool_iterations) {
      auto c = AttackConfig::defaults(kind, iters);
      c.rng_seed = grid.seed;
      out.push_back(c);
    }
    return out;
  }
  for (double eps : grid.epsilons) {
    auto c = AttackConfig::defaults(kind, eps);
    c.rng_seed = grid.seed;
    out.push_back(c);
  }
  return out;
}

std::string format_factor(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

void check_nonempty(const LabeledImageSet& set) {
  if (set.size() == 0) throw std::invalid_argument("evaluation set is empty");
}

Report with_grid_metadata(Report r, const SweepGrid& grid) {
  auto join = [](const auto& values) {
    std::string s;
    for (const auto& v : values) {
      if (!s.empty()) s += ';';
      s += format_factor(static_cast<double>(v));
    }
    return s;
  };
  std::string attacks;
  for (auto k : grid.attacks) {
    if (!attacks.empty()) attacks += ';';
    attacks += attack_name(k);
  }
  r.metadata.push_back({"slopes", join(grid.slopes)});
  r.metadata.push_back({"epsilons", join(grid.epsilons)});
  r.metadata.push_back({"attacks", attacks});
  r.metadata.push_back({"deepfool_iterations", join(grid.deepfool_iterations)});
  r.metadata.push_back({"attack_seed", std::to_string(grid.seed)});
  normalize(r);
  return r;
}

}  // namespace

std::vector<double> SweepGrid::default_epsilons(bool mnist) {
  std::vector<double> out;
  const int n = mnist ? 6 : 5;
  const double step = mnist ? 0.05 : 0.02;
  // Integer multiples keep the printed grid free of accumulated rounding.
  for (int i = 0; i <= n; ++i) out.push_back(std::round(i * step * 1000.0) / 1000.0);
  return out;
}

void SweepGrid::validate() const {
  if (slopes.empty()) throw ConfigError("slope list is empty");
  for (double s : slopes) {
    if (!(s > 0)) throw ConfigError("slopes must be positive");
  }
  if (epsilons.empty() || epsilons.front() != 0) {
    throw ConfigError("epsilon grid must start at 0");
  }
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > epsilons[i - 1])) throw ConfigError("epsilon grid must be ascending");
  }
  if (attacks.empty()) throw ConfigError("attack list is empty");
  for (int it : deepfool_iterations) {
    if (it < 1) throw ConfigError("deepfool iteration budgets must be >= 1");
  }
}

double eval_clean(const Model& model, const LabeledImageSet& set, const ExecutionOptions& exec) {
  check_nonempty(set);
  auto pred = chunked_predictions(eval_logits(model), set, exec);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) correct += pred[i] == set.labels[i];
  return fraction(correct, set.size());
}

EvalRecord eval_under_attack(const Model& model, const LabeledImageSet& set,
                             const AttackConfig& config, const ExecutionOptions& exec) {
  check_nonempty(set);
  config.validate(model.spec().num_classes);
  auto fn = eval_logits(model);
  auto clean = chunked_predictions(fn, set, exec);
  auto adv = adversarial_predictions(fn, nullptr, set, config, exec);
  return score(model, set, config, clean, adv, std::string(attack_name(config.kind)));
}

Report slope_sweep(const Model& base, const LabeledImageSet& full, const SweepGrid& grid,
                   const ExecutionOptions& exec) {
  grid.validate();
  const LabeledImageSet set = budgeted(full, grid);
  check_nonempty(set);
  Report report;
  for (double slope : grid.slopes) {
    const Model model = base.with_test_slope(static_cast<Real>(slope));
    auto fn = eval_logits(model);
    auto clean = chunked_predictions(fn, set, exec);
    for (auto kind : grid.attacks) {
      for (const auto& config : configs_for(kind, grid)) {
        config.validate(model.spec().num_classes);
        auto adv = adversarial_predictions(fn, nullptr, set, config, exec);
        report.records.push_back(score(model, set, config, clean, adv, std::string(attack_name(kind))));
      }
    }
  }
  if (std::find(grid.attacks.begin(), grid.attacks.end(), AttackKind::DeepFool) != grid.attacks.end()) {
    report.metadata.push_back({"deepfool_epsilon_units", "iterations"});
  }
  return with_grid_metadata(std::move(report), grid);
}

Report targeted_sweep(const Model& base, const LabeledImageSet& full, const SweepGrid& grid,
                      const ExecutionOptions& exec) {
  grid.validate();
  const LabeledImageSet set = budgeted(full, grid);
  check_nonempty(set);
  Report report;
  for (double slope : grid.slopes) {
    const Model model = base.with_test_slope(static_cast<Real>(slope));
    auto fn = eval_logits(model);
    auto clean = chunked_predictions(fn, set, exec);
    for (std::size_t target = 0; target < model.spec().num_classes; ++target) {
      for (double eps : grid.epsilons) {
        auto config = AttackConfig::defaults(AttackKind::FGSMTargeted, eps);
        config.target_class = static_cast<int>(target);
        config.rng_seed = grid.seed;
        config.validate(model.spec().num_classes);
        auto adv = adversarial_predictions(fn, nullptr, set, config, exec);
        report.records.push_back(score(model, set, config, clean, adv, "fgsm_targeted"));
      }
    }
  }
  SweepGrid g = grid;
  g.attacks = {AttackKind::FGSMTargeted};
  return with_grid_metadata(std::move(report), g);
}

Report activation_swap(const Model& base, const LabeledImageSet& full,
                       const std::vector<ActivationKind>& kinds, const SweepGrid& grid,
                       const ExecutionOptions& exec) {
  grid.validate();
  if (kinds.empty()) throw ConfigError("activation list is empty");
  const LabeledImageSet set = budgeted(full, grid);
  check_nonempty(set);
  Report report;
  for (auto kind : kinds) {
    const Model model = base.with_test_activation(kind, 1);
    auto fn = eval_logits(model);
    auto clean = chunked_predictions(fn, set, exec);
    for (const auto& config : configs_for(AttackKind::FGSM, grid)) {
      auto adv = adversarial_predictions(fn, nullptr, set, config, exec);
      report.records.push_back(score(model, set, config, clean, adv, "fgsm"));
    }
  }
  SweepGrid g = grid;
  g.attacks = {AttackKind::FGSM};
  g.slopes = {1};
  return with_grid_metadata(std::move(report), g);
}

Report scaling_experiment(const Model& base, const LabeledImageSet& full,
                          const std::vector<double>& factors, bool clip, const SweepGrid& grid,
                          const ExecutionOptions& exec) {
  grid.validate();
  if (factors.empty()) throw ConfigError("scale factor list is empty");
  for (double f : factors) {
    if (!(f > 0)) throw ConfigError("scale factors must be positive");
  }
  const LabeledImageSet subset = budgeted(full, grid);
  check_nonempty(subset);
  const Model model = base.with_test_slope(1);
  auto fn = eval_logits(model);
  Report report;
  for (double factor : factors) {
    LabeledImageSet set = scale_pixels(subset, factor, clip);
    set.name = subset.name + "_x" + format_factor(factor) + (clip ? "_clip" : "_noclip");
    auto clean = chunked_predictions(fn, set, exec);
    for (auto config : configs_for(AttackKind::FGSM, grid)) {
      config.box = PixelBox{0, clip ? Real(1) : static_cast<Real>(std::max(1.0, factor))};
      auto adv = adversarial_predictions(fn, nullptr, set, config, exec);
      report.records.push_back(score(model, set, config, clean, adv, "fgsm"));
    }
  }
  SweepGrid g = grid;
  g.attacks = {AttackKind::FGSM};
  g.slopes = {1};
  Report out = with_grid_metadata(std::move(report), g);
  std::string fs;
  for (double f : factors) fs += (fs.empty() ? "" : ";") + format_factor(f);
  out.metadata.push_back({"scale_factors", fs});
  out.metadata.push_back({"scale_clip", clip ? "true" : "false"});
  return out;
}

Report bpda_transfer_eval(const Model& original, const Model& substitute,
                          const LabeledImageSet& full, const SweepGrid& grid,
                          const ExecutionOptions& exec) {
  grid.validate();
  if (original.spec().input_shape != substitute.spec().input_shape) {
    throw ShapeError("substitute input shape " + shape_to_string(substitute.spec().input_shape) +
                     " differs from the original's " + shape_to_string(original.spec().input_shape));
  }
  const LabeledImageSet set = budgeted(full, grid);
  check_nonempty(set);
  const auto crafted_on = eval_logits(substitute.with_test_slope(1));
  Report report;
  for (auto kind : grid.attacks) {
    for (const auto& config : configs_for(kind, grid)) {
      config.validate(original.spec().num_classes);
      // Craft once per chunk, then score the same images at every slope.
      std::vector<std::vector<int>> adv_by_slope(grid.slopes.size(), std::vector<int>(set.size()));
      std::vector<LogitFn> judges;
      for (double s : grid.slopes) judges.push_back(eval_logits(original.with_test_slope(static_cast<Real>(s))));
      parallel_chunks(set.size(), exec.chunk_images, exec.threads,
                      [&](std::size_t, std::size_t begin, std::size_t end) {
                        std::span<const int> labels(set.labels.data() + begin, end - begin);
                        auto adv = run_attack(crafted_on, set.image_range(begin, end), labels, config, begin);
                        for (std::size_t k = 0; k < judges.size(); ++k) {
                          auto pred = argmax_rows(judges[k](adv.images, nullptr));
                          std::copy(pred.begin(), pred.end(),
                                    adv_by_slope[k].begin() + static_cast<std::ptrdiff_t>(begin));
                        }
                      });
      for (std::size_t k = 0; k < grid.slopes.size(); ++k) {
        const Model model = original.with_test_slope(static_cast<Real>(grid.slopes[k]));
        auto clean = chunked_predictions(judges[k], set, exec);
        report.records.push_back(
            score(model, set, config, clean, adv_by_slope[k], "bpda_" + std::string(attack_name(kind))));
      }
    }
  }
  Report out = with_grid_metadata(std::move(report), grid);
  out.metadata.push_back({"bpda_loss", "soft_cross_entropy(student_softmax, teacher_softmax_at_slope_1)"});
  return out;
}

std::string features_csv(const Model& model, const LabeledImageSet& set, const ExecutionOptions& exec) {
  std::vector<std::string> chunks((set.size() + std::max<std::size_t>(exec.chunk_images, 1) - 1) /
                                  std::max<std::size_t>(exec.chunk_images, 1));
  parallel_chunks(set.size(), exec.chunk_images, exec.threads,
                  [&](std::size_t c, std::size_t begin, std::size_t end) {
                    Tensor f = penultimate_features(model, set.image_range(begin, end));
                    const std::size_t width = f.dim(1);
                    std::string text;
                    char buf[32];
                    for (std::size_t i = 0; i < end - begin; ++i) {
                      text += std::to_string(set.labels[begin + i]);
                      for (std::size_t j = 0; j < width; ++j) {
                        std::snprintf(buf, sizeof buf, ",%.6g", static_cast<double>(f[i * width + j]));
                        text += buf;
                      }
                      text += '\n';
                    }
                    chunks[c] = std::move(text);
                  });
  std::string out;
  for (auto& c : chunks) out += c;
  return out;
}

void export_features(const Model& model, const LabeledImageSet& set, const std::filesystem::path& path,
                     const ExecutionOptions& exec) {
  write_text_file(path, features_csv(model, set, exec));
}

SRELU_NAMESPACE_END
