#include "srelu/ops.hpp"

// Results must not depend on where buffers happen to be aligned. Eigen's
// blocked GEMM/GEMV kernels are alignment-independent, but the coefficient
// based path it takes for tiny products and its vectorised reductions peel by
// alignment, so tiny products are forced onto GEMM and sums are plain loops.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " +
                     std::to_string(rank) + ", got shape " + shape_to_string(t.shape()));
  }
}

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Caffe-style unfolding of one C×H×W image into a (C·Kh·Kw)×(OH·OW) matrix.
void im2col(const Real* img, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t oh, std::size_t ow, Real* cols) {
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        Real* row = cols + ((ci * kh + ki) * kw + kj) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const Real* src = img + (ci * h + y * stride + ki) * w + kj;
          for (std::size_t x = 0; x < ow; ++x) row[y * ow + x] = src[x * stride];
        }
      }
    }
  }
}

void col2im_add(const Real* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
                std::size_t kw, std::size_t stride, std::size_t oh, std::size_t ow, Real* img) {
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const Real* row = cols + ((ci * kh + ki) * kw + kj) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          Real* dst = img + (ci * h + y * stride + ki) * w + kj;
          for (std::size_t x = 0; x < ow; ++x) dst[x * stride] += row[y * ow + x];
        }
      }
    }
  }
}

Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

// Elementwise map with a derivative computed from the input value.
template <typename F, typename D>
Tensor elementwise(const Tensor& input, Tape* tape, F f, D df) {
  std::vector<Real> out(input.numel());
  auto in = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  bool tracked = is_tracked(tape, {&input});
  Tensor result(input.shape(), std::move(out), tracked);
  if (tracked) {
    Tensor saved = input;
    tape->record(result, std::span(&input, 1),
                 [saved, df](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   auto x = saved.values();
                   for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * df(x[i]);
                 });
  }
  return result;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes,
                  const char* op) {
  if (labels.size() != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(rows) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw std::out_of_range(std::string(op) + ": label " + std::to_string(l) +
                              " outside [0," + std::to_string(classes) + ")");
    }
  }
}

// Row-wise log-sum-exp with max subtraction.
std::vector<Real> log_softmax(std::span<const Real> logits, std::size_t rows, std::size_t cols) {
  std::vector<Real> out(logits.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* z = logits.data() + r * cols;
    Real m = *std::max_element(z, z + cols);
    Real s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(z[c] - m);
    Real lse = m + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = z[c] - lse;
  }
  return out;
}

}  // namespace

std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::SReLU: return "srelu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::ELU: return "elu";
    case ActivationKind::Softplus: return "softplus";
    case ActivationKind::Identity: return "identity";
  }
  return "unknown";
}

ActivationKind parse_activation(std::string_view name) {
  for (auto k : {ActivationKind::SReLU, ActivationKind::Sigmoid, ActivationKind::Tanh,
                 ActivationKind::LeakyReLU, ActivationKind::ELU, ActivationKind::Softplus,
                 ActivationKind::Identity}) {
    if (activation_name(k) == name) return k;
  }
  if (name == "relu") return ActivationKind::SReLU;
  throw ConfigError("unknown activation kind '" + std::string(name) + "'");
}

namespace ops {

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride, Tape* tape) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weights, 4, "conv2d", "weights");
  require_rank(bias, 1, "conv2d", "bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t o = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  if (weights.dim(1) != c) {
    throw ShapeError("conv2d: input has " + std::to_string(c) + " channels but weights " +
                     shape_to_string(weights.shape()) + " expect " +
                     std::to_string(weights.dim(1)));
  }
  if (bias.dim(0) != o) {
    throw ShapeError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match " +
                     std::to_string(o) + " output channels");
  }
  if (kh > h || kw > w || kh == 0 || kw == 0) {
    throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                     " does not fit input " + shape_to_string(input.shape()));
  }
  const std::size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  const std::size_t patch = c * kh * kw, plane = oh * ow;

  auto cols = std::make_shared<std::vector<Real>>(n * patch * plane);
  std::vector<Real> out(n * o * plane);
  CMapR wmat(weights.data(), ix(o), ix(patch));
  Eigen::Map<const VecR> bvec(bias.data(), ix(o));
  for (std::size_t i = 0; i < n; ++i) {
    Real* ci = cols->data() + i * patch * plane;
    im2col(input.data() + i * c * h * w, c, h, w, kh, kw, stride, oh, ow, ci);
    MapR out_i(out.data() + i * o * plane, ix(o), ix(plane));
    out_i.noalias() = wmat * CMapR(ci, ix(patch), ix(plane));
    out_i.colwise() += bvec;
  }

  bool tracked = is_tracked(tape, {&input, &weights, &bias});
  Tensor result({n, o, oh, ow}, std::move(out), tracked);
  if (tracked) {
    const Tensor ins[] = {input, weights, bias};
    Tensor wsaved = weights;
    tape->record(result, ins,
                 [=](std::span<const Real> g, std::span<Real* const> gi) {
                   CMapR wm(wsaved.data(), ix(o), ix(patch));
                   MatR gcols(ix(patch), ix(plane));
                   for (std::size_t i = 0; i < n; ++i) {
                     CMapR gi_out(g.data() + i * o * plane, ix(o), ix(plane));
                     CMapR cols_i(cols->data() + i * patch * plane, ix(patch), ix(plane));
                     if (gi[1] != nullptr) {
                       MapR(gi[1], ix(o), ix(patch)).noalias() += gi_out * cols_i.transpose();
                     }
                     if (gi[2] != nullptr) {
                       const Real* gp = g.data() + i * o * plane;
                       for (std::size_t k = 0; k < o; ++k) {
                         Real acc = 0;
                         for (std::size_t p = 0; p < plane; ++p) acc += gp[k * plane + p];
                         gi[2][k] += acc;
                       }
                     }
                     if (gi[0] != nullptr) {
                       gcols.noalias() = wm.transpose() * gi_out;
                       col2im_add(gcols.data(), c, h, w, kh, kw, stride, oh, ow,
                                  gi[0] + i * c * h * w);
                     }
                   }
                 });
  }
  return result;
}

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride, Tape* tape) {
  require_rank(input, 4, "maxpool2d", "input");
  if (window == 0 || stride == 0) throw ShapeError("maxpool2d: window and stride must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (window > h || window > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " larger than input " +
                     shape_to_string(input.shape()));
  }
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  std::vector<Real> out(n * c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const Real* in = input.data();
  std::size_t k = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++k) {
        std::size_t best = base + (y * stride) * w + x * stride;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            std::size_t idx = base + (y * stride + dy) * w + x * stride + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        out[k] = in[best];
        (*argmax)[k] = best;
      }
    }
  }
  bool tracked = is_tracked(tape, {&input});
  Tensor result({n, c, oh, ow}, std::move(out), tracked);
  if (tracked) {
    tape->record(result, std::span(&input, 1),
                 [argmax](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   for (std::size_t i = 0; i < g.size(); ++i) gi[0][(*argmax)[i]] += g[i];
                 });
  }
  return result;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias, Tape* tape) {
  require_rank(input, 2, "dense", "input");
  require_rank(weights, 2, "dense", "weights");
  require_rank(bias, 1, "dense", "bias");
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  if (weights.dim(0) != f) {
    throw ShapeError("dense: input " + shape_to_string(input.shape()) +
                     " incompatible with weights " + shape_to_string(weights.shape()));
  }
  if (bias.dim(0) != g) {
    throw ShapeError("dense: bias " + shape_to_string(bias.shape()) + " does not match " +
                     std::to_string(g) + " outputs");
  }
  std::vector<Real> out(n * g);
  MapR out_m(out.data(), ix(n), ix(g));
  out_m.noalias() = CMapR(input.data(), ix(n), ix(f)) * CMapR(weights.data(), ix(f), ix(g));
  out_m.rowwise() += Eigen::Map<const VecR>(bias.data(), ix(g)).transpose();

  bool tracked = is_tracked(tape, {&input, &weights, &bias});
  Tensor result({n, g}, std::move(out), tracked);
  if (tracked) {
    const Tensor ins[] = {input, weights, bias};
    Tensor x = input, wt = weights;
    tape->record(result, ins, [=](std::span<const Real> gr, std::span<Real* const> gi) {
      CMapR gm(gr.data(), ix(n), ix(g));
      if (gi[0] != nullptr) {
        MapR(gi[0], ix(n), ix(f)).noalias() += gm * CMapR(wt.data(), ix(f), ix(g)).transpose();
      }
      if (gi[1] != nullptr) {
        MapR(gi[1], ix(f), ix(g)).noalias() += CMapR(x.data(), ix(n), ix(f)).transpose() * gm;
      }
      if (gi[2] != nullptr) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t k = 0; k < g; ++k) gi[2][k] += gr[r * g + k];
        }
      }
    });
  }
  return result;
}

Tensor srelu(const Tensor& input, Real slope, Tape* tape) {
  if (!(slope >= 0)) {
    throw std::invalid_argument("srelu: slope must be non-negative, got " +
                                std::to_string(slope));
  }
  return elementwise(
      input, tape, [slope](Real x) { return x > 0 ? slope * x : Real(0); },
      [slope](Real x) { return x > 0 ? slope : Real(0); });
}

Tensor activation(const Tensor& input, ActivationKind kind, Tape* tape, Real slope) {
  switch (kind) {
    case ActivationKind::SReLU:
      return srelu(input, slope, tape);
    case ActivationKind::Sigmoid:
      return elementwise(input, tape, sigmoid, [](Real x) {
        Real s = sigmoid(x);
        return s * (Real(1) - s);
      });
    case ActivationKind::Tanh:
      return elementwise(
          input, tape, [](Real x) { return std::tanh(x); },
          [](Real x) {
            Real t = std::tanh(x);
            return Real(1) - t * t;
          });
    case ActivationKind::LeakyReLU:
      return elementwise(
          input, tape, [](Real x) { return x > 0 ? x : kLeakyReluSlope * x; },
          [](Real x) { return x > 0 ? Real(1) : kLeakyReluSlope; });
    case ActivationKind::ELU:
      return elementwise(
          input, tape, [](Real x) { return x > 0 ? x : kEluAlpha * std::expm1(x); },
          [](Real x) { return x > 0 ? Real(1) : kEluAlpha * std::exp(x); });
    case ActivationKind::Softplus:
      return elementwise(
          input, tape,
          [](Real x) { return std::max(x, Real(0)) + std::log1p(std::exp(-std::abs(x))); },
          sigmoid);
    case ActivationKind::Identity:
      return elementwise(
          input, tape, [](Real x) { return x; }, [](Real) { return Real(1); });
  }
  throw ConfigError("activation: unknown kind");
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tape* tape) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  check_labels(labels, n, c, "softmax_cross_entropy");
  auto logp = log_softmax(logits.values(), n, c);
  double total = 0;
  for (std::size_t r = 0; r < n; ++r) total -= logp[r * c + static_cast<std::size_t>(labels[r])];
  Real loss = n == 0 ? Real(0) : static_cast<Real>(total / static_cast<double>(n));

  bool tracked = is_tracked(tape, {&logits});
  Tensor result = Tensor(Shape{}, {loss}, tracked);
  if (tracked) {
    std::vector<int> lab(labels.begin(), labels.end());
    auto saved = std::make_shared<std::vector<Real>>(std::move(logp));
    tape->record(result, std::span(&logits, 1),
                 [saved, lab, n, c](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   const Real scale = g[0] / static_cast<Real>(n);
                   for (std::size_t r = 0; r < n; ++r) {
                     for (std::size_t k = 0; k < c; ++k) {
                       Real p = std::exp((*saved)[r * c + k]);
                       if (static_cast<int>(k) == lab[r]) p -= Real(1);
                       gi[0][r * c + k] += scale * p;
                     }
                   }
                 });
  }
  return result;
}

Tensor soft_cross_entropy(const Tensor& logits, const Tensor& target_probs, Tape* tape) {
  require_rank(logits, 2, "soft_cross_entropy", "logits");
  if (target_probs.shape() != logits.shape()) {
    throw ShapeError("soft_cross_entropy: targets " + shape_to_string(target_probs.shape()) +
                     " vs logits " + shape_to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto logp = log_softmax(logits.values(), n, c);
  double total = 0;
  auto p = target_probs.values();
  for (std::size_t i = 0; i < logp.size(); ++i) total -= p[i] * logp[i];
  Real loss = n == 0 ? Real(0) : static_cast<Real>(total / static_cast<double>(n));

  bool tracked = is_tracked(tape, {&logits});
  Tensor result = Tensor(Shape{}, {loss}, tracked);
  if (tracked) {
    auto saved = std::make_shared<std::vector<Real>>(std::move(logp));
    Tensor targets = target_probs;
    tape->record(result, std::span(&logits, 1),
                 [saved, targets, n](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   const Real scale = g[0] / static_cast<Real>(n);
                   auto t = targets.values();
                   for (std::size_t i = 0; i < saved->size(); ++i) {
                     gi[0][i] += scale * (std::exp((*saved)[i]) - t[i]);
                   }
                 });
  }
  return result;
}

Tensor reshape(const Tensor& input, Shape shape, Tape* tape) {
  if (shape_numel(shape) != input.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(input.shape()) + " as " +
                     shape_to_string(shape));
  }
  bool tracked = is_tracked(tape, {&input});
  Tensor result(std::move(shape), input.to_vector(), tracked);
  if (tracked) {
    tape->record(result, std::span(&input, 1),
                 [](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                 });
  }
  return result;
}

Tensor sum(const Tensor& input, Tape* tape) {
  double s = 0;
  for (auto v : input.values()) s += v;
  bool tracked = is_tracked(tape, {&input});
  Tensor result(Shape{}, {static_cast<Real>(s)}, tracked);
  if (tracked) {
    const std::size_t count = input.numel();
    tape->record(result, std::span(&input, 1),
                 [count](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   for (std::size_t i = 0; i < count; ++i) gi[0][i] += g[0];
                 });
  }
  return result;
}

Tensor weighted_sum(const Tensor& input, std::span<const Real> coeffs, Tape* tape) {
  if (coeffs.size() != input.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(coeffs.size()) +
                     " coefficients for tensor of shape " + shape_to_string(input.shape()));
  }
  double s = 0;
  auto x = input.values();
  for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(coeffs[i]) * x[i];
  bool tracked = is_tracked(tape, {&input});
  Tensor result(Shape{}, {static_cast<Real>(s)}, tracked);
  if (tracked) {
    auto c = std::make_shared<std::vector<Real>>(coeffs.begin(), coeffs.end());
    tape->record(result, std::span(&input, 1),
                 [c](std::span<const Real> g, std::span<Real* const> gi) {
                   if (gi[0] == nullptr) return;
                   for (std::size_t i = 0; i < c->size(); ++i) gi[0][i] += g[0] * (*c)[i];
                 });
  }
  return result;
}

}  // namespace ops

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows", "logits");
  auto logp = log_softmax(logits.values(), logits.dim(0), logits.dim(1));
  for (auto& v : logp) v = std::exp(v);
  return Tensor(logits.shape(), std::move(logp));
}

std::vector<int> argmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "argmax_rows", "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Real* z = logits.data() + r * c;
    out[r] = static_cast<int>(std::max_element(z, z + c) - z);
  }
  return out;
}

std::vector<int> argmin_rows(const Tensor& logits) {
  require_rank(logits, 2, "argmin_rows", "logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Real* z = logits.data() + r * c;
    out[r] = static_cast<int>(std::min_element(z, z + c) - z);
  }
  return out;
}

SRELU_NAMESPACE_END
