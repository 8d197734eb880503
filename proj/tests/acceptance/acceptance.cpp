// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset, e.g. `acceptance 1 6 7`.
//
// Trained models are cached in SRELU_CACHE_DIR so reruns skip training. Delete
// the cache to re-measure training accuracy and runtime from scratch.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "checks.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"
#include "srelu/data.hpp"
#include "srelu/errors.hpp"
#include "srelu/experiments.hpp"

using namespace srelu;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = SRELU_DATA_DIR;
const fs::path kCacheDir = SRELU_CACHE_DIR;
constexpr std::uint64_t kSeed = 1;
constexpr std::size_t kIterativeBudget = 2000;  // BIM, PGD and targeted cells

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExecutionOptions exec() {
  return {std::max(1u, std::thread::hardware_concurrency()), 250};
}

// ---------------------------------------------------------------- shared state

struct TrainedModel {
  Model model;
  std::optional<double> train_seconds;  // empty when loaded from the cache
};

TrainedModel cached_training(const std::string& file, const ArchitectureSpec& spec,
                             const std::function<Model()>& trainer) {
  const fs::path path = kCacheDir / file;
  if (fs::exists(path)) {
    try {
      return {load_params(path, spec), std::nullopt};
    } catch (const std::exception& e) {
      std::cerr << "ignoring unreadable cache entry " << path << ": " << e.what() << "\n";
    }
  }
  const auto t0 = Clock::now();
  Model m = trainer();
  const double secs = seconds_since(t0);
  fs::create_directories(kCacheDir);
  save_params(m, path);
  return {std::move(m), secs};
}

std::string timing(const TrainedModel& t) {
  return t.train_seconds ? "trained in " + fmt("%.0f", *t.train_seconds) + " s"
                         : "cached model, delete " + kCacheDir.string() + " to retrain";
}

const fs::path mnist_dir() { return kDataDir / "mnist"; }
const fs::path cifar_dir() { return kDataDir / "cifar10"; }

const LabeledImageSet& mnist_train() {
  static const auto set = [] {
    const auto f = mnist_files(mnist_dir(), true);
    return load_mnist_idx(f.images, f.labels);
  }();
  return set;
}

const LabeledImageSet& mnist_test() {
  static const auto set = [] {
    const auto f = mnist_files(mnist_dir(), false);
    return load_mnist_idx(f.images, f.labels);
  }();
  return set;
}

const TrainedModel& mnist_model() {
  static const auto m = cached_training("mnist_seed1.bin", ArchitectureSpec::get(ArchitectureId::MnistCnn), [] {
    TrainConfig c;
    c.epochs = 5;
    c.seed = kSeed;
    return train_from_scratch(ArchitectureSpec::get(ArchitectureId::MnistCnn), mnist_train(), c).model;
  });
  return m;
}

double mnist_clean() {
  static const double acc = eval_clean(mnist_model().model, mnist_test(), exec());
  return acc;
}

SweepGrid mnist_grid(std::vector<double> slopes, std::vector<AttackKind> attacks,
                     std::optional<std::size_t> budget) {
  SweepGrid g;
  g.slopes = std::move(slopes);
  g.epsilons = SweepGrid::default_epsilons(true);
  g.attacks = std::move(attacks);
  g.image_budget = budget;
  g.seed = kSeed;
  return g;
}

// FGSM and RFGSM on the full test set, BIM and PGD on the first 2000 images.
const Report& headline_sweep() {
  static const Report r = [] {
    const Model& m = mnist_model().model;
    Report out = slope_sweep(m, mnist_test(), mnist_grid({1, 10, 100}, {AttackKind::FGSM, AttackKind::RFGSM}, {}),
                             exec());
    out.append(slope_sweep(m, mnist_test(),
                           mnist_grid({1, 100}, {AttackKind::BIM, AttackKind::PGD}, kIterativeBudget), exec()));
    return out;
  }();
  return r;
}

const EvalRecord& find_record(const Report& r, const std::string& attack, double slope, double eps,
                              std::optional<std::size_t> n = {}) {
  for (const auto& rec : r.records) {
    if (rec.attack == attack && rec.test_slope == slope && std::abs(rec.epsilon - eps) < 1e-9 &&
        (!n || rec.n_images == *n)) {
      return rec;
    }
  }
  throw std::runtime_error("no record for " + attack + " slope " + fmt("%g", slope) + " eps " + fmt("%g", eps));
}

// ---------------------------------------------------------------- criteria

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  double worst32 = 0, worst64 = 0;
  std::string worst_case;
  bool ok = true;
  auto run = [&](const oracle::Case& c) {
    const auto r64 = oracle::check(c, false);
    const auto r32 = oracle::check(c, true);
    if (r64.compared == 0) ok = false;
    if (r32.relative_error > worst32) worst_case = c.op + " seed " + std::to_string(c.seed);
    worst32 = std::max(worst32, r32.relative_error);
    worst64 = std::max(worst64, r64.relative_error);
  };
  std::size_t cases = 0;
  for (const auto& op : oracle::layer_ops()) {
    for (int seed = 0; seed < 20; ++seed, ++cases) run(oracle::make_case(op, seed));
  }
  run(oracle::make_case("mnist_cnn_loss", 0, 8));
  ++cases;
  const double secs = seconds_since(t0);
  ok = ok && worst32 < 1e-3 && worst64 < 1e-6 && secs < 60;
  return {ok, std::to_string(cases) + " cases, max rel err 32-bit " + fmt("%.2e", worst32) + " (" + worst_case +
                  "), 64-bit " + fmt("%.2e", worst64) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome mnist_accuracy() {
  const auto& m = mnist_model();
  const double acc = mnist_clean();
  const bool fast = !m.train_seconds || *m.train_seconds <= 30 * 60;
  return {acc >= 0.97 && fast, "test accuracy " + fmt("%.4f", acc) + " (need >= 0.97), " + timing(m)};
}

Outcome cifar_accuracy() {
  const auto spec = ArchitectureSpec::get(ArchitectureId::Cifar10Cnn1);
  const auto m = cached_training("cifar10_cnn1_seed1.bin", spec, [&] {
    TrainConfig c;
    c.epochs = 30;
    c.seed = kSeed;
    return train_from_scratch(spec, load_cifar10_bin(cifar10_files(cifar_dir(), true)), c).model;
  });
  const double acc = eval_clean(m.model, load_cifar10_bin(cifar10_files(cifar_dir(), false)), exec());
  const bool fast = !m.train_seconds || *m.train_seconds <= 3 * 3600;
  return {acc >= 0.55 && acc <= 0.65 && fast,
          "CIFAR10_CNN1 test accuracy " + fmt("%.4f", acc) + " (need [0.55, 0.65], full training set), " + timing(m)};
}

Outcome defense_headline() {
  const Report& r = headline_sweep();
  bool ok = true;
  std::ostringstream d;
  double worst_gap = 0;
  for (const auto& rec : r.records) {
    if (rec.attack != "fgsm" || rec.test_slope == 1) continue;
    worst_gap = std::max(worst_gap, rec.clean_acc - rec.adv_acc);
  }
  ok = worst_gap <= 0.02;
  d << "FGSM at slopes 10,100 worst drop from clean " << fmt("%.4f", worst_gap) << " (need <= 0.02); recovery at 100:";
  for (const auto& row : summarize(r)) {
    if (row.test_slope != 100) continue;
    const double rec = row.recovery.value_or(0);
    d << " " << row.attack << " " << fmt("%.3f", rec);
    ok = ok && rec > 0.20;
  }
  d << " (need > 0.20)";
  return {ok, d.str()};
}

Outcome attack_sanity() {
  const Report& r = headline_sweep();
  const auto eps = SweepGrid::default_epsilons(true);
  bool monotone = true;
  std::ostringstream d;
  double prev = 2;
  for (double e : eps) {
    const double acc = find_record(r, "fgsm", 1, e).adv_acc;
    if (acc > prev + 0.01) monotone = false;
    prev = acc;
  }
  // PGD runs on the first 2000 images, so FGSM is compared on the same images.
  const Report fgsm_sub =
      slope_sweep(mnist_model().model, mnist_test(), mnist_grid({1}, {AttackKind::FGSM}, kIterativeBudget), exec());
  double worst = -1;
  for (double e : eps) {
    const double gap = find_record(r, "pgd", 1, e).adv_acc - find_record(fgsm_sub, "fgsm", 1, e).adv_acc;
    worst = std::max(worst, gap);
  }
  const bool ok = monotone && worst <= 0.02;
  d << "FGSM accuracy at slope 1 " << (monotone ? "non-increasing" : "INCREASES") << " over eps:";
  for (double e : eps) d << " " << fmt("%.3f", find_record(r, "fgsm", 1, e).adv_acc);
  d << "; max PGD minus FGSM " << fmt("%.4f", worst) << " (need <= 0.02)";
  return {ok, d.str()};
}

Outcome identities() {
  const auto t0 = Clock::now();
  const std::string a = checks::single_step_identities(100);
  const std::string b = checks::bounds_and_noop(20);
  const double secs = seconds_since(t0);
  const bool ok = a.empty() && b.empty() && secs < 60;
  return {ok, ok ? "100 identity trials, 20 bound/no-op trials over 9 attacks, " + fmt("%.1f", secs) + " s"
                 : (a.empty() ? b : a) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome deepfool_oracle() {
  const auto t0 = Clock::now();
  const auto r = checks::deepfool_linear_oracle(50);
  const double secs = seconds_since(t0);
  return {r.max_relative_error < 0.01 && secs < 60,
          std::to_string(r.images) + " points on 50 models, max relative error " + fmt("%.2e", r.max_relative_error) +
              ", " + fmt("%.1f", secs) + " s"};
}

Outcome targeted_defense() {
  const Report r = targeted_sweep(mnist_model().model, mnist_test(),
                                  mnist_grid({1, 10}, {AttackKind::FGSMTargeted}, kIterativeBudget), exec());
  std::map<double, std::pair<double, int>> mean;
  for (const auto& rec : r.records) {
    if (rec.epsilon == 0) continue;
    mean[rec.test_slope].first += rec.attack_success;
    mean[rec.test_slope].second += 1;
  }
  const double m1 = mean[1].first / mean[1].second;
  const double m10 = mean[10].first / mean[10].second;
  return {m10 <= m1, "mean targeted success over 10 targets and eps > 0: slope 1 " + fmt("%.4f", m1) + ", slope 10 " +
                         fmt("%.4f", m10) + " (" + std::to_string(kIterativeBudget) + " images)"};
}

Outcome bpda_ordering() {
  const Model& original = mnist_model().model;
  const auto sub = cached_training("mnist_substitute_seed2.bin", ArchitectureSpec::get(ArchitectureId::MnistCnn), [&] {
    TrainConfig c;
    c.epochs = 5;
    c.seed = 2;
    return bpda_train_substitute(original, mnist_train(), c).model;
  });
  SweepGrid g = mnist_grid({100}, {AttackKind::FGSM}, {});
  g.epsilons = {0, 0.3};
  const Report r = bpda_transfer_eval(original, sub.model, mnist_test(), g, exec());
  const auto& transfer = find_record(r, "bpda_fgsm", 100, 0.3);
  const double direct = find_record(headline_sweep(), "fgsm", 1, 0.3).adv_acc;
  const bool ok = transfer.adv_acc < transfer.clean_acc - 0.10 && transfer.adv_acc > direct;
  return {ok, "eps 0.3: transfer " + fmt("%.4f", transfer.adv_acc) + ", clean at slope 100 " +
                  fmt("%.4f", transfer.clean_acc) + ", direct FGSM at slope 1 " + fmt("%.4f", direct) + "; substitute " +
                  timing(sub)};
}

std::string slurp(const fs::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

Outcome cli_determinism() {
  const fs::path root = kCacheDir / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string bin = SRELU_BINARY;
  const std::string common = " --dataset mnist --data-dir " + mnist_dir().string() + " --arch mnist --seed 3";
  auto run = [&](const std::string& args, const std::string& out, int threads) {
    const std::string cmd = bin + " " + args + common + " --out " + (root / out).string() + " --threads " +
                            std::to_string(threads) + " > " + (root / (out + ".log")).string() + " 2>&1";
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
  };
  std::vector<std::string> compared;
  bool ok = true;
  auto same = [&](const std::string& a, const std::string& b, const std::string& file) {
    const bool eq = slurp(root / a / file) == slurp(root / b / file);
    ok = ok && eq;
    compared.push_back(file + (eq ? "" : " (DIFFERS)"));
  };
  for (auto [out, threads] : {std::pair{"train_a", 1}, {"train_b", 4}}) {
    run("train --epochs 1 --train-subset 5000", out, threads);
  }
  same("train_a", "train_b", "model.bin");
  same("train_a", "train_b", "train_log.csv");
  const std::string params = " --params " + (root / "train_a" / "model.bin").string() + " --images 300";
  const std::string sweep = "sweep --slopes 1,100 --attacks fgsm,rfgsm,pgd,deepfool,gaussian_noise,salt_pepper" + params;
  run(sweep, "sweep_a", 1);
  run(sweep, "sweep_b", 4);
  run(sweep, "sweep_c", 1);
  same("sweep_a", "sweep_b", "sweep.csv");
  same("sweep_a", "sweep_c", "sweep.csv");
  same("sweep_a", "sweep_b", "sweep_summary.csv");
  const std::string targeted = "targeted-sweep --slopes 1,10" + params;
  run(targeted, "targeted_a", 1);
  run(targeted, "targeted_b", 3);
  same("targeted_a", "targeted_b", "targeted.csv");
  std::string list;
  for (const auto& c : compared) list += (list.empty() ? "" : ", ") + c;
  return {ok, "byte-identical across runs and --threads 1/3/4: " + list};
}

Outcome parsers() {
  std::vector<std::string> failures;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) failures.push_back(what);
  };
  auto rejects = [&](const std::function<void()>& f, const std::string& what) {
    try {
      f();
      failures.push_back(what + " accepted");
    } catch (const FormatError&) {
    } catch (const std::exception& e) {
      failures.push_back(what + " raised the wrong error: " + e.what());
    }
  };
  const auto img = fixtures::mnist_images();
  const auto lab = fixtures::mnist_labels();
  const auto mnist = parse_mnist_idx(img, lab);
  expect(encode_mnist_images(mnist) == img && encode_mnist_labels(mnist) == lab, "IDX fixture round-trip");
  const auto cifar = fixtures::cifar_records({3, 0, 9});
  expect(encode_cifar10_bin(parse_cifar10_bin(cifar)) == cifar, "CIFAR fixture round-trip");

  auto bad_magic = img;
  bad_magic[3] = 0x01;
  rejects([&] { parse_mnist_idx(bad_magic, lab); }, "IDX image magic");
  auto bad_label_magic = lab;
  bad_label_magic[3] = 0x03;
  rejects([&] { parse_mnist_idx(img, bad_label_magic); }, "IDX label magic");
  auto truncated = img;
  truncated.pop_back();
  rejects([&] { parse_mnist_idx(truncated, lab); }, "truncated IDX images");
  auto padded = img;
  padded.push_back(0);
  rejects([&] { parse_mnist_idx(padded, lab); }, "IDX images with trailing bytes");
  auto count = lab;
  count[7] = 3;
  rejects([&] { parse_mnist_idx(img, count); }, "IDX label count mismatch");
  auto short_cifar = cifar;
  short_cifar.pop_back();
  rejects([&] { parse_cifar10_bin(short_cifar); }, "CIFAR length not a record multiple");
  auto bad_cifar_label = cifar;
  bad_cifar_label[0] = 10;
  rejects([&] { parse_cifar10_bin(bad_cifar_label); }, "CIFAR label 10");

  std::size_t real_files = 0;
  if (fs::exists(mnist_dir())) {
    const auto f = mnist_files(mnist_dir(), false);
    const auto set = load_mnist_idx(f.images, f.labels);
    expect(encode_mnist_images(set) == read_file(f.images) && encode_mnist_labels(set) == read_file(f.labels),
           "MNIST test files round-trip");
    real_files += 2;
  }
  if (fs::exists(cifar_dir())) {
    const auto f = cifar10_files(cifar_dir(), false);
    expect(encode_cifar10_bin(load_cifar10_bin(f)) == read_file(f.front()), "CIFAR test batch round-trip");
    real_files += 1;
  }
  std::string detail = "fixture round-trips byte-exact, 7 malformed fixtures rejected with FormatError, " +
                       std::to_string(real_files) + " real files round-tripped";
  if (!failures.empty()) {
    detail.clear();
    for (const auto& f : failures) detail += (detail.empty() ? "" : "; ") + f;
  }
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient oracle", gradient_oracle},      {2, "MNIST clean accuracy", mnist_accuracy},
      {3, "CIFAR-10 clean accuracy", cifar_accuracy}, {4, "untargeted defense", defense_headline},
      {5, "attack sanity", attack_sanity},           {6, "attack identities and bounds", identities},
      {7, "DeepFool linear oracle", deepfool_oracle}, {8, "targeted defense", targeted_defense},
      {9, "BPDA ordering", bpda_ordering},           {10, "CLI determinism", cli_determinism},
      {11, "dataset parsers", parsers},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
