#include <cstdio>
#include <functional>
#include <stdexcept>

#include "srelu/errors.hpp"
#include "srelu/experiments.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

// Loss of one minibatch given the model's logits on it.
using BatchLoss = std::function<Tensor(const Tensor& logits, const Batch& batch, Tape* tape)>;

void check_config(const TrainConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(c.momentum >= 0 && c.momentum < 1)) throw ConfigError("momentum must lie in [0,1)");
  if (!(c.train_slope > 0)) throw ConfigError("train_slope must be positive");
}

TrainResult sgd(const Model& initial, const LabeledImageSet& set, const TrainConfig& config,
                const BatchLoss& batch_loss) {
  check_config(config);
  if (set.size() == 0 && config.epochs > 0) throw std::invalid_argument("training set is empty");

  Model model = initial.with_train_slope(config.train_slope);
  std::vector<std::vector<Real>> weights, velocity;
  for (const auto& p : model.params()) {
    weights.push_back(p.value.to_vector());
    velocity.emplace_back(p.value.numel(), Real(0));
  }
  const Real lr = static_cast<Real>(config.learning_rate);
  const Real mu = static_cast<Real>(config.momentum);

  TrainResult result{model, {}};
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    BatchIterator it(set, config.batch_size, BatchIterator::Order::Shuffled, config.seed,
                     static_cast<std::uint64_t>(epoch));
    Batch batch;
    double loss_sum = 0;
    std::size_t steps = 0, correct = 0, seen = 0;
    while (it.next(batch)) {
      ParameterSet tracked;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto& p = model.params()[i];
        tracked.push_back({p.name, Tensor(p.value.shape(), weights[i], true)});
      }
      Model current = model.with_params(tracked);
      Tape tape;
      Tensor logits = forward_logits(current, batch.images, Mode::Train, &tape);
      Tensor loss = batch_loss(logits, batch, &tape);
      auto grads = tape.backward(loss);
      for (std::size_t i = 0; i < weights.size(); ++i) {
        const Tensor grad = grads.get(tracked[i].value);
        auto g = grad.values();
        auto& w = weights[i];
        auto& v = velocity[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
          v[j] = mu * v[j] + g[j];
          w[j] -= lr * v[j];
        }
      }
      auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
      seen += pred.size();
      loss_sum += static_cast<double>(loss.item());
      ++steps;
    }
    result.log.push_back({epoch + 1, steps, steps ? loss_sum / static_cast<double>(steps) : 0.0,
                          seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0});
  }
  ParameterSet final_params;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& p = model.params()[i];
    final_params.push_back({p.name, Tensor(p.value.shape(), weights[i])});
  }
  result.model = model.with_params(std::move(final_params));
  return result;
}

}  // namespace

TrainResult train(const Model& initial, const LabeledImageSet& set, const TrainConfig& config) {
  return sgd(initial, set, config, [](const Tensor& logits, const Batch& batch, Tape* tape) {
    return ops::softmax_cross_entropy(logits, batch.labels, tape);
  });
}

TrainResult train_from_scratch(const ArchitectureSpec& spec, const LabeledImageSet& set,
                               const TrainConfig& config) {
  return train(build_model(spec, config.seed), set, config);
}

TrainResult bpda_train_substitute(const Model& teacher, const LabeledImageSet& set,
                                  const TrainConfig& config) {
  const Model reference = teacher.with_test_slope(1);
  TrainConfig c = config;
  c.train_slope = 1;
  return sgd(build_model(teacher.spec(), config.seed), set, c,
             [&reference](const Tensor& logits, const Batch& batch, Tape* tape) {
               Tensor target = softmax_rows(forward_logits(reference, batch.images, Mode::Eval));
               return ops::soft_cross_entropy(logits, target, tape);
             });
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  std::string out = "epoch,steps,mean_loss,train_accuracy\n";
  char line[128];
  for (const auto& r : log) {
    std::snprintf(line, sizeof line, "%d,%zu,%.6g,%.6g\n", r.epoch, r.steps, r.mean_loss,
                  r.train_accuracy);
    out += line;
  }
  return out;
}

SRELU_NAMESPACE_END
