#include "srelu/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "srelu/errors.hpp"
#include "srelu/ops.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

constexpr AttackKind kAllAttacks[] = {
    AttackKind::FGSM,     AttackKind::FGSMTargeted,  AttackKind::BIM,
    AttackKind::RFGSM,    AttackKind::StepLL,        AttackKind::PGD,
    AttackKind::DeepFool, AttackKind::GaussianNoise, AttackKind::SaltPepper,
};

Real sign(Real g) { return g > 0 ? Real(1) : (g < 0 ? Real(-1) : Real(0)); }

Real clamp_box(Real v, PixelBox box) { return std::min(std::max(v, box.lo), box.hi); }

std::size_t batch_size(const Tensor& images) {
  if (images.rank() < 2) {
    throw ShapeError("attack input must be a batch (rank >= 2), got " +
                     shape_to_string(images.shape()));
  }
  return images.dim(0);
}

void check_epsilon(double eps) {
  if (!(eps >= 0 && eps <= 1)) {
    throw ConfigError("epsilon must lie in [0,1], got " + std::to_string(eps));
  }
}

void check_steps(int steps) {
  if (steps < 1) throw ConfigError("iterative attacks need steps >= 1, got " + std::to_string(steps));
}

std::mt19937_64 image_rng(std::uint64_t seed, std::size_t image_index) {
  // splitmix64 finaliser spreads neighbouring indices across the seed space.
  std::uint64_t z = seed ^ static_cast<std::uint64_t>(image_index);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return std::mt19937_64(z ^ (z >> 31));
}

// Distances to the clean batch plus success flags against `reference`:
// untargeted flags mark prediction != reference, targeted ones ==.
AdversarialBatch finish(const LogitFn* fn, const Tensor& clean, std::vector<Real> adv,
                        std::span<const int> reference, bool targeted) {
  AdversarialBatch out;
  out.images = Tensor(clean.shape(), std::move(adv));
  const std::size_t n = batch_size(clean);
  const std::size_t per = n == 0 ? 0 : clean.numel() / n;
  out.linf.assign(n, 0.0);
  auto a = out.images.values();
  auto c = clean.values();
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0;
    for (std::size_t j = i * per; j < (i + 1) * per; ++j) {
      m = std::max(m, std::abs(static_cast<double>(a[j]) - static_cast<double>(c[j])));
    }
    out.linf[i] = m;
  }
  if (fn != nullptr && !reference.empty() && n > 0) {
    out.predictions = argmax_rows((*fn)(out.images, nullptr));
    out.success.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int p = out.predictions[i];
      out.success[i] = targeted ? p == reference[i] : p != reference[i];
    }
  }
  return out;
}

// One signed gradient step of `direction`·ε, clipped to the box.
std::vector<Real> sign_step(const Tensor& x, const Tensor& grad, Real step, PixelBox box) {
  std::vector<Real> out(x.numel());
  auto xv = x.values();
  auto gv = grad.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clamp_box(xv[i] + step * sign(gv[i]), box);
  return out;
}

AdversarialBatch targeted_step(const LogitFn& fn, const Tensor& images, std::span<const int> targets,
                               double epsilon, PixelBox box) {
  check_epsilon(epsilon);
  Tensor g = loss_input_gradient(fn, images, targets);
  return finish(&fn, images, sign_step(images, g, -static_cast<Real>(epsilon), box), targets, true);
}

// Projected sign iterations from `start`, shared by BIM and PGD.
std::vector<Real> projected_iterations(const LogitFn& fn, const Tensor& clean,
                                       std::span<const int> labels, std::vector<Real> start,
                                       Real epsilon, int steps, Real step_size, PixelBox box) {
  auto c = clean.values();
  std::vector<Real> lo(c.size()), hi(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    lo[i] = c[i] - epsilon;
    hi[i] = c[i] + epsilon;
  }
  std::vector<Real> x = std::move(start);
  for (int s = 0; s < steps; ++s) {
    Tensor current(clean.shape(), x);
    Tensor g = loss_input_gradient(fn, current, labels);
    auto gv = g.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      Real v = x[i] + step_size * sign(gv[i]);
      v = std::min(std::max(v, lo[i]), hi[i]);
      x[i] = clamp_box(v, box);
    }
  }
  return x;
}

}  // namespace

LogitFn eval_logits(const Model& model) {
  return [model](const Tensor& batch, Tape* tape) {
    return forward_logits(model, batch, Mode::Eval, tape);
  };
}

std::string_view attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::FGSM: return "fgsm";
    case AttackKind::FGSMTargeted: return "fgsm_targeted";
    case AttackKind::BIM: return "bim";
    case AttackKind::RFGSM: return "rfgsm";
    case AttackKind::StepLL: return "stepll";
    case AttackKind::PGD: return "pgd";
    case AttackKind::DeepFool: return "deepfool";
    case AttackKind::GaussianNoise: return "gaussian_noise";
    case AttackKind::SaltPepper: return "salt_pepper";
  }
  return "unknown";
}

AttackKind parse_attack(std::string_view name) {
  for (auto k : kAllAttacks) {
    if (attack_name(k) == name) return k;
  }
  throw ConfigError("unknown attack '" + std::string(name) + "'");
}

bool is_linf_bounded(AttackKind kind) {
  switch (kind) {
    case AttackKind::FGSM:
    case AttackKind::FGSMTargeted:
    case AttackKind::BIM:
    case AttackKind::RFGSM:
    case AttackKind::StepLL:
    case AttackKind::PGD:
      return true;
    default:
      return false;
  }
}

AttackConfig AttackConfig::defaults(AttackKind kind, double epsilon) {
  AttackConfig c;
  c.kind = kind;
  c.epsilon = epsilon;
  switch (kind) {
    case AttackKind::BIM:
      c.steps = 10;
      c.step_size = epsilon / c.steps;
      break;
    case AttackKind::PGD:
      c.steps = 40;
      c.step_size = 2.5 * epsilon / c.steps;
      c.random_start = true;
      break;
    case AttackKind::RFGSM:
      c.alpha_noise = epsilon / 2;
      break;
    case AttackKind::DeepFool:
      c.steps = static_cast<int>(std::lround(epsilon));
      c.overshoot = 0.02;
      break;
    case AttackKind::FGSMTargeted:
      c.targeted = true;
      break;
    default:
      break;
  }
  return c;
}

void AttackConfig::validate(std::size_t num_classes) const {
  if (kind == AttackKind::DeepFool) {
    check_steps(steps);
    if (!(overshoot >= 0)) throw ConfigError("deepfool overshoot must be non-negative");
    return;
  }
  check_epsilon(epsilon);
  if (kind == AttackKind::BIM || kind == AttackKind::PGD) {
    check_steps(steps);
    if (!(step_size >= 0)) throw ConfigError("step_size must be non-negative");
  }
  if (kind == AttackKind::RFGSM && !(alpha_noise >= 0 && alpha_noise <= epsilon)) {
    throw ConfigError("rfgsm needs 0 <= alpha_noise <= epsilon");
  }
  if (targeted != (kind == AttackKind::FGSMTargeted)) {
    throw ConfigError("only fgsm_targeted is a targeted attack");
  }
  if (targeted) {
    if (!target_class) throw ConfigError("targeted attack needs a target_class");
    if (*target_class < 0 || static_cast<std::size_t>(*target_class) >= num_classes) {
      throw ConfigError("target_class " + std::to_string(*target_class) + " outside [0," +
                        std::to_string(num_classes) + ")");
    }
  }
  if (!(box.lo < box.hi)) throw ConfigError("pixel box must satisfy lo < hi");
}

Tensor loss_input_gradient(const LogitFn& fn, const Tensor& images, std::span<const int> labels) {
  Tape tape;
  Tensor x = images.requiring_grad();
  Tensor logits = fn(x, &tape);
  Tensor loss = ops::softmax_cross_entropy(logits, labels, &tape);
  if (!loss.requires_grad()) return Tensor::zeros(images.shape());
  return tape.backward(loss).get(x);
}

AdversarialBatch fgsm(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                      double epsilon, PixelBox box) {
  check_epsilon(epsilon);
  Tensor g = loss_input_gradient(fn, images, labels);
  return finish(&fn, images, sign_step(images, g, static_cast<Real>(epsilon), box), labels, false);
}

AdversarialBatch fgsm_targeted(const LogitFn& fn, const Tensor& images, int target_class,
                               double epsilon, PixelBox box) {
  std::vector<int> targets(batch_size(images), target_class);
  return targeted_step(fn, images, targets, epsilon, box);
}

AdversarialBatch bim(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                     double epsilon, int steps, double step_size, PixelBox box) {
  check_epsilon(epsilon);
  check_steps(steps);
  auto x = projected_iterations(fn, images, labels, images.to_vector(), static_cast<Real>(epsilon),
                                steps, static_cast<Real>(step_size), box);
  return finish(&fn, images, std::move(x), labels, false);
}

AdversarialBatch rfgsm(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                       double epsilon, double alpha_noise, std::uint64_t seed,
                       std::size_t first_index, PixelBox box) {
  check_epsilon(epsilon);
  if (!(alpha_noise >= 0 && alpha_noise <= epsilon)) {
    throw ConfigError("rfgsm: alpha_noise " + std::to_string(alpha_noise) +
                      " must lie in [0, epsilon]");
  }
  const std::size_t n = batch_size(images);
  const std::size_t per = n == 0 ? 0 : images.numel() / n;
  const Real alpha = static_cast<Real>(alpha_noise);
  std::vector<Real> noisy = images.to_vector();
  if (alpha > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = image_rng(seed, first_index + i);
      std::normal_distribution<double> normal;
      for (std::size_t j = i * per; j < (i + 1) * per; ++j) {
        noisy[j] = clamp_box(noisy[j] + alpha * sign(static_cast<Real>(normal(rng))), box);
      }
    }
  }
  Tensor start(images.shape(), std::move(noisy));
  Tensor g = loss_input_gradient(fn, start, labels);
  auto adv = sign_step(start, g, static_cast<Real>(epsilon) - alpha, box);
  return finish(&fn, images, std::move(adv), labels, false);
}

AdversarialBatch stepll(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                        double epsilon, PixelBox box) {
  check_epsilon(epsilon);
  auto least_likely = argmin_rows(fn(images, nullptr));
  Tensor g = loss_input_gradient(fn, images, least_likely);
  return finish(&fn, images, sign_step(images, g, -static_cast<Real>(epsilon), box), labels, false);
}

AdversarialBatch pgd(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                     double epsilon, int steps, double step_size, bool random_start,
                     std::uint64_t seed, std::size_t first_index, PixelBox box) {
  check_epsilon(epsilon);
  check_steps(steps);
  const Real eps = static_cast<Real>(epsilon);
  std::vector<Real> start = images.to_vector();
  if (random_start && eps > 0) {
    const std::size_t n = batch_size(images);
    const std::size_t per = n == 0 ? 0 : images.numel() / n;
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = image_rng(seed, first_index + i);
      std::uniform_real_distribution<double> uniform(-epsilon, epsilon);
      for (std::size_t j = i * per; j < (i + 1) * per; ++j) {
        start[j] = clamp_box(start[j] + static_cast<Real>(uniform(rng)), box);
      }
    }
  }
  auto x = projected_iterations(fn, images, labels, std::move(start), eps, steps,
                                static_cast<Real>(step_size), box);
  return finish(&fn, images, std::move(x), labels, false);
}

AdversarialBatch deepfool(const LogitFn& fn, const Tensor& images, int max_iters,
                          double overshoot, PixelBox box) {
  check_steps(max_iters);
  const std::size_t n = batch_size(images);
  const std::size_t per = n == 0 ? 0 : images.numel() / n;
  auto x0 = images.values();
  const Tensor clean_logits = fn(images, nullptr);
  const std::vector<int> original = argmax_rows(clean_logits);
  const std::size_t classes = n == 0 ? 0 : clean_logits.dim(1);

  std::vector<double> r_tot(images.numel(), 0.0);
  std::vector<int> iterations(n, 0);
  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  const double scale = 1.0 + overshoot;

  for (int it = 0; it < max_iters && !active.empty(); ++it) {
    // Current iterates of the still-unflipped images.
    Shape shape = images.shape();
    shape[0] = active.size();
    std::vector<Real> xs(active.size() * per);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      for (std::size_t j = 0; j < per; ++j) {
        xs[a * per + j] = static_cast<Real>(x0[i * per + j] + scale * r_tot[i * per + j]);
      }
    }
    Tape tape;
    Tensor x = Tensor(shape, std::move(xs)).requiring_grad();
    Tensor logits = fn(x, &tape);
    if (!logits.requires_grad()) break;

    // Gradient of every class logit w.r.t. the input.
    std::vector<std::vector<Real>> grads(classes);
    std::vector<Real> coeffs(logits.numel());
    for (std::size_t k = 0; k < classes; ++k) {
      std::fill(coeffs.begin(), coeffs.end(), Real(0));
      for (std::size_t a = 0; a < active.size(); ++a) coeffs[a * classes + k] = Real(1);
      Tensor pick = ops::weighted_sum(logits, coeffs, &tape);
      grads[k] = tape.backward(pick).get(x).to_vector();
    }

    std::vector<std::size_t> still_active;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      const std::size_t orig = static_cast<std::size_t>(original[i]);
      const Real* z = logits.data() + a * classes;
      if (static_cast<std::size_t>(argmax_rows(Tensor({1, classes}, std::vector<Real>(z, z + classes)))[0]) != orig) {
        continue;  // already flipped
      }
      double best = std::numeric_limits<double>::infinity();
      double best_gap = 0, best_norm2 = 0;
      std::size_t best_k = classes;
      for (std::size_t k = 0; k < classes; ++k) {
        if (k == orig) continue;
        double norm2 = 0;
        for (std::size_t j = 0; j < per; ++j) {
          double w = static_cast<double>(grads[k][a * per + j]) - grads[orig][a * per + j];
          norm2 += w * w;
        }
        if (norm2 == 0) continue;
        const double gap = static_cast<double>(z[k]) - z[orig];
        const double dist = std::abs(gap) / std::sqrt(norm2);
        if (dist < best) {
          best = dist;
          best_k = k;
          best_gap = gap;
          best_norm2 = norm2;
        }
      }
      if (best_k == classes) continue;  // no usable direction
      ++iterations[i];
      // Minimal L2 step onto the linearised boundary between orig and best_k.
      const double coef = std::abs(best_gap) / best_norm2;
      for (std::size_t j = 0; j < per; ++j) {
        double w = static_cast<double>(grads[best_k][a * per + j]) - grads[orig][a * per + j];
        r_tot[i * per + j] += coef * w;
      }
      still_active.push_back(i);
    }
    // Drop images whose new iterate already flips the label.
    if (still_active.empty()) break;
    Shape s2 = images.shape();
    s2[0] = still_active.size();
    std::vector<Real> probe(still_active.size() * per);
    for (std::size_t a = 0; a < still_active.size(); ++a) {
      const std::size_t i = still_active[a];
      for (std::size_t j = 0; j < per; ++j) {
        probe[a * per + j] = static_cast<Real>(x0[i * per + j] + scale * r_tot[i * per + j]);
      }
    }
    auto pred = argmax_rows(fn(Tensor(s2, std::move(probe)), nullptr));
    active.clear();
    for (std::size_t a = 0; a < still_active.size(); ++a) {
      if (pred[a] == original[still_active[a]]) active.push_back(still_active[a]);
    }
  }

  std::vector<Real> adv(images.numel());
  for (std::size_t j = 0; j < adv.size(); ++j) {
    adv[j] = clamp_box(static_cast<Real>(x0[j] + scale * r_tot[j]), box);
  }
  AdversarialBatch out = finish(&fn, images, std::move(adv), original, false);
  out.l2_perturbation.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = i * per; j < (i + 1) * per; ++j) s += r_tot[j] * r_tot[j];
    out.l2_perturbation[i] = std::sqrt(s);
  }
  out.iterations = std::move(iterations);
  return out;
}

AdversarialBatch gaussian_noise_attack(const Tensor& images, double epsilon, std::uint64_t seed,
                                       std::size_t first_index, PixelBox box) {
  if (!(epsilon >= 0)) throw ConfigError("noise scale must be non-negative");
  const std::size_t n = batch_size(images);
  const std::size_t per = n == 0 ? 0 : images.numel() / n;
  std::vector<Real> adv = images.to_vector();
  if (epsilon > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      auto rng = image_rng(seed, first_index + i);
      std::normal_distribution<double> normal;
      for (std::size_t j = i * per; j < (i + 1) * per; ++j) {
        adv[j] = clamp_box(static_cast<Real>(adv[j] + epsilon * normal(rng)), box);
      }
    }
  }
  return finish(nullptr, images, std::move(adv), {}, false);
}

AdversarialBatch salt_pepper_attack(const Tensor& images, double fraction, std::uint64_t seed,
                                    std::size_t first_index, PixelBox box) {
  if (!(fraction >= 0 && fraction <= 1)) {
    throw ConfigError("salt_pepper: fraction " + std::to_string(fraction) + " outside [0,1]");
  }
  const std::size_t n = batch_size(images);
  const std::size_t per = n == 0 ? 0 : images.numel() / n;
  // N×C×H×W images flip whole pixels; any other layout flips single values.
  const std::size_t channels = images.rank() == 4 ? images.dim(1) : 1;
  const std::size_t locations = per / channels;
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(locations)));
  std::vector<Real> adv = images.to_vector();
  std::vector<std::size_t> order(locations);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = image_rng(seed, first_index + i);
    for (std::size_t p = 0; p < locations; ++p) order[p] = p;
    for (std::size_t p = 0; p < count; ++p) {
      std::size_t j = p + static_cast<std::size_t>(rng() % (locations - p));
      std::swap(order[p], order[j]);
      const Real value = (rng() & 1U) ? box.hi : box.lo;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        adv[i * per + ch * locations + order[p]] = value;
      }
    }
  }
  return finish(nullptr, images, std::move(adv), {}, false);
}

AdversarialBatch run_attack(const LogitFn& fn, const Tensor& images, std::span<const int> labels,
                            const AttackConfig& config, std::size_t first_index) {
  config.validate();
  const auto& c = config;
  AdversarialBatch out;
  switch (c.kind) {
    case AttackKind::FGSM:
      return fgsm(fn, images, labels, c.epsilon, c.box);
    case AttackKind::FGSMTargeted:
      return fgsm_targeted(fn, images, *c.target_class, c.epsilon, c.box);
    case AttackKind::BIM:
      return bim(fn, images, labels, c.epsilon, c.steps, c.step_size, c.box);
    case AttackKind::RFGSM:
      return rfgsm(fn, images, labels, c.epsilon, c.alpha_noise, c.rng_seed, first_index, c.box);
    case AttackKind::StepLL:
      return stepll(fn, images, labels, c.epsilon, c.box);
    case AttackKind::PGD:
      return pgd(fn, images, labels, c.epsilon, c.steps, c.step_size, c.random_start, c.rng_seed,
                 first_index, c.box);
    case AttackKind::DeepFool:
      return deepfool(fn, images, c.steps, c.overshoot, c.box);
    case AttackKind::GaussianNoise:
      out = gaussian_noise_attack(images, c.epsilon, c.rng_seed, first_index, c.box);
      break;
    case AttackKind::SaltPepper:
      out = salt_pepper_attack(images, c.epsilon, c.rng_seed, first_index, c.box);
      break;
  }
  if (batch_size(images) > 0) {
    out.predictions = argmax_rows(fn(out.images, nullptr));
    out.success.resize(out.predictions.size());
    for (std::size_t i = 0; i < out.predictions.size(); ++i) {
      out.success[i] = out.predictions[i] != labels[i];
    }
  }
  return out;
}

SRELU_NAMESPACE_END
