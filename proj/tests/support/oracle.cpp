// Case generation and the float64 finite-difference side of the oracle.
// Built against the 64-bit library.

#include "oracle.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "srelu/gradcheck.hpp"
#include "srelu/models.hpp"

namespace oracle {

namespace {

using Shape = std::vector<std::size_t>;

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(int seed) : rng(0x5eed0000ULL + static_cast<std::uint64_t>(seed)) {}
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
};

std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

void add_input(Case& c, Gen& g, Shape s, double scale = 1.0) {
  for (std::size_t i = 0; i < numel(s); ++i) c.inputs.push_back(scale * g.normal());
  c.shapes.push_back(std::move(s));
}

void set_coeffs(Case& c, Gen& g, std::size_t n) {
  c.coeffs.clear();
  for (std::size_t i = 0; i < n; ++i) c.coeffs.push_back(g.normal());
}

}  // namespace

const std::vector<std::string>& layer_ops() {
  static const std::vector<std::string> ops = {
      "conv2d", "maxpool2d", "dense",    "srelu",   "sigmoid",
      "tanh",   "leaky_relu", "elu",     "softplus", "softmax_cross_entropy",
      "soft_cross_entropy", "reshape", "sum", "weighted_sum"};
  return ops;
}

Case make_case(const std::string& op, int seed, std::size_t images) {
  Case c;
  c.op = op;
  c.seed = seed;
  Gen g(seed);
  if (op == "conv2d") {
    const std::size_t n = g.pick(1, 2), ci = g.pick(1, 3), co = g.pick(1, 4), k = g.pick(1, 3);
    c.stride = g.pick(1, 2);
    const std::size_t h = k + g.pick(0, 4), w = k + g.pick(0, 4);
    add_input(c, g, {n, ci, h, w});
    add_input(c, g, {co, ci, k, k}, 0.5);
    add_input(c, g, {co}, 0.5);
    set_coeffs(c, g, n * co * ((h - k) / c.stride + 1) * ((w - k) / c.stride + 1));
  } else if (op == "maxpool2d") {
    const std::size_t n = g.pick(1, 2), ch = g.pick(1, 3);
    c.window = g.pick(1, 3);
    c.stride = g.pick(1, c.window);
    const std::size_t h = c.window + g.pick(0, 4), w = c.window + g.pick(0, 4);
    add_input(c, g, {n, ch, h, w});
    set_coeffs(c, g, n * ch * ((h - c.window) / c.stride + 1) * ((w - c.window) / c.stride + 1));
  } else if (op == "dense") {
    const std::size_t n = g.pick(1, 4), f = g.pick(1, 6), o = g.pick(1, 5);
    add_input(c, g, {n, f});
    add_input(c, g, {f, o}, 0.5);
    add_input(c, g, {o}, 0.5);
    set_coeffs(c, g, n * o);
  } else if (op == "softmax_cross_entropy" || op == "soft_cross_entropy") {
    const std::size_t n = g.pick(1, 5), k = g.pick(2, 10);
    add_input(c, g, {n, k}, 2.0);
    for (std::size_t i = 0; i < n; ++i) c.labels.push_back(static_cast<int>(g.pick(0, k - 1)));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(k);
      double total = 0;
      for (auto& v : row) total += v = g.uniform(0.01, 1.0);
      for (auto v : row) c.aux.push_back(v / total);
    }
  } else if (op == "mnist_cnn_loss") {
    auto spec = srelu::ArchitectureSpec::get(srelu::ArchitectureId::MnistCnn);
    Shape in{images, 1, 28, 28};
    for (std::size_t i = 0; i < numel(in); ++i) c.inputs.push_back(g.uniform(0, 1));
    c.shapes.push_back(in);
    for (const auto& p : spec.parameters()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
      for (std::size_t i = 0; i < numel(p.shape); ++i) c.inputs.push_back(g.uniform(-bound, bound));
      c.shapes.push_back(p.shape);
    }
    for (std::size_t i = 0; i < images; ++i) c.labels.push_back(static_cast<int>(g.pick(0, 9)));
    // A seeded sample of coordinates keeps the oracle affordable; every
    // parameter tensor and the input batch are represented.
    std::size_t offset = 0;
    for (const auto& s : c.shapes) {
      const std::size_t n = numel(s);
      for (int k = 0; k < 40; ++k) c.check_indices.push_back(offset + g.pick(0, n - 1));
      offset += n;
    }
  } else {
    // Elementwise ops and the reductions share one random tensor.
    const std::size_t rank = g.pick(1, 4);
    Shape s;
    for (std::size_t i = 0; i < rank; ++i) s.push_back(g.pick(1, 4));
    if (op == "reshape" && s.size() < 2) s.insert(s.begin(), 2);
    add_input(c, g, s, 2.0);
    if (op == "srelu") c.slope = g.uniform(0.1, 10.0);
    set_coeffs(c, g, numel(s));
  }
  return c;
}

Result check(const Case& c, bool thirty_two_bit, double step, double kink_tolerance) {
  std::vector<double> point = c.inputs;
  if (thirty_two_bit) {
    for (auto& v : point) v = static_cast<double>(static_cast<float>(v));
  }
  const std::vector<double> analytic =
      thirty_two_bit ? f32::gradient(c, point) : f64::gradient(c, point);

  using srelu::f64::Tensor;
  Tensor x({point.size()}, point);
  Tensor a({analytic.size()}, analytic);
  srelu::f64::ScalarFn f = [&c](const Tensor& t) { return f64::evaluate(c, t.to_vector()); };
  std::vector<std::size_t> indices = c.check_indices;
  if (indices.empty()) {
    indices.resize(point.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  }
  auto cmp = srelu::f64::compare_with_finite_differences(f, x, a, step, kink_tolerance, indices);
  return {c.op, c.seed, cmp.relative_error, cmp.compared, cmp.excluded};
}

}  // namespace oracle
