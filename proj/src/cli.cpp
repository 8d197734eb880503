#include "srelu/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <thread>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

const std::vector<std::string> kCommands = {"train", "eval",  "attack", "sweep",          "targeted-sweep",
                                            "swap",  "scale", "bpda",   "export-features"};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError(field + ": '" + text + "' is not a number");
  }
}

std::vector<double> parse_numbers(const std::string& field, const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(parse_number(field, s));
  return out;
}

std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.10g", x);
    s += (s.empty() ? "" : ",") + std::string(buf);
  }
  return s;
}

LabeledImageSet load_set(const RunConfig& c, bool train) {
  LabeledImageSet set;
  if (c.dataset == "mnist") {
    auto f = mnist_files(c.data_dir, train);
    set = load_mnist_idx(f.images, f.labels);
  } else {
    set = load_cifar10_bin(cifar10_files(c.data_dir, train));
    set.name = "cifar10";
  }
  return set;
}

Model load_model(const RunConfig& c, const std::filesystem::path& path) {
  return load_params(path, ArchitectureSpec::get(c.arch));
}

LabeledImageSet budget_set(const LabeledImageSet& set, const SweepGrid& grid) {
  if (!grid.image_budget || *grid.image_budget >= set.size()) return set;
  return take_first(set, *grid.image_budget);
}

// Files the command reads, so a missing one fails before any work starts.
std::vector<std::filesystem::path> required_inputs(const RunConfig& c) {
  std::vector<std::filesystem::path> paths;
  auto add_set = [&](bool train) {
    if (c.dataset == "mnist") {
      auto f = mnist_files(c.data_dir, train);
      paths.push_back(f.images);
      paths.push_back(f.labels);
    } else {
      for (auto& p : cifar10_files(c.data_dir, train)) paths.push_back(p);
    }
  };
  add_set(false);
  if (c.command == "train" || (c.command == "bpda" && c.substitute.empty())) add_set(true);
  if (!c.params.empty()) paths.push_back(c.params);
  if (!c.substitute.empty()) paths.push_back(c.substitute);
  return paths;
}

struct RunWriter {
  const RunConfig& config;
  std::vector<std::pair<std::string, std::string>> manifest;
  std::vector<std::string> outputs;

  void write(const std::string& name, const std::string& text) {
    write_text_file(config.out / name, text);
    outputs.push_back(name);
  }
  void add_report(const std::string& stem, const Report& report, bool with_summary) {
    write(stem + ".csv", report_csv(report));
    if (with_summary) write(stem + "_summary.csv", summary_csv(summarize(report)));
    for (const auto& m : report.metadata) manifest.push_back(m);
  }
  void finish() {
    std::string text;
    auto line = [&](const std::string& k, const std::string& v) { text += k + " = " + v + "\n"; };
    line("command", config.command);
    line("code_version", kCodeVersion);
    line("precision", std::string(kPrecisionName));
    line("param_file_version", std::to_string(kParamFileVersion));
    line("report_format_version", std::to_string(kReportFormatVersion));
    line("seed", std::to_string(config.seed));
    for (const auto& [k, v] : manifest) line(k, v);
    std::string outs;
    for (const auto& o : outputs) outs += (outs.empty() ? "" : ",") + o;
    line("outputs", outs);
    write_text_file(config.out / "manifest.txt", text);
  }
};

Report clean_report(const Model& base, const LabeledImageSet& set, const std::vector<double>& slopes,
                    const ExecutionOptions& exec) {
  Report report;
  for (double s : slopes) {
    const Model m = base.with_test_slope(static_cast<Real>(s));
    EvalRecord r;
    r.dataset = set.name;
    r.model = std::string(architecture_name(m.spec().id));
    r.activation = std::string(activation_name(m.slopes().test_activation));
    r.train_slope = static_cast<double>(m.slopes().train_slope);
    r.test_slope = s;
    r.attack = "none";
    r.steps = 0;
    r.n_images = set.size();
    r.clean_acc = r.adv_acc = eval_clean(m, set, exec);
    report.records.push_back(r);
  }
  normalize(report);
  return report;
}

void run_command(const RunConfig& c);

}  // namespace

RunConfig parse_run_config(const std::vector<std::string>& args) {
  CLI::App app{"Test-time ReLU slope defense experiments"};
  app.set_config("--config", "", "key=value file; command-line flags override its values");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);

  std::string dataset = "mnist", data_dir, arch, params, substitute, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, target;
  double lr = 0.01, momentum = 0.9, train_slope = 1, slope = 1;
  std::size_t batch = 64, chunk = 250;
  std::optional<std::size_t> train_subset;
  std::string slopes = "0.5,1,2,5,10,100", epsilons, attacks = "fgsm", deepfool_iters = "1,2,5,10,20,50";
  std::string images, attack = "fgsm", activations = "sigmoid,tanh,leaky_relu,elu,softplus";
  std::string factors = "1,2,5,10,100";
  double epsilon = 0.1;
  bool clip = true;
  unsigned threads = 0;
  std::uint64_t attack_seed = 0;
  bool attack_seed_set = false;

  app.add_option("--dataset", dataset, "mnist or cifar10")->check(CLI::IsMember({"mnist", "cifar10"}));
  app.add_option("--data-dir", data_dir, "directory with the dataset files");
  app.add_option("--arch", arch, "mnist, cifar10-cnn1 or cifar10-cnn2");
  app.add_option("--params", params, "parameter file of the model under test");
  app.add_option("--substitute", substitute, "bpda: pretrained substitute parameter file");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "seed for initialisation, shuffling and attack noise");
  app.add_option("--epochs", epochs, "training epochs (default 5 for mnist, 30 for cifar10)");
  app.add_option("--lr", lr, "SGD learning rate");
  app.add_option("--momentum", momentum, "SGD momentum");
  app.add_option("--batch-size", batch, "SGD minibatch size");
  app.add_option("--train-slope", train_slope, "SReLU slope used during training");
  app.add_option("--train-subset", train_subset, "train on the first N images only");
  // Lists are written "a,b,c". Config files split such values into
  // separate items, so each option re-joins whatever it receives.
  auto list_option = [&app](const std::string& name, std::string& target, const std::string& help) {
    app.add_option(name, target, help)
        ->expected(1, CLI::detail::expected_max_vector_size)
        ->multi_option_policy(CLI::MultiOptionPolicy::Join)
        ->delimiter(',');
  };
  list_option("--slopes", slopes, "comma-separated test-time slopes");
  list_option("--epsilons", epsilons, "comma-separated epsilon grid, starting at 0");
  list_option("--attacks", attacks, "comma-separated attack names");
  list_option("--deepfool-iters", deepfool_iters, "comma-separated DeepFool iteration budgets");
  app.add_option("--images", images, "first N test images, or 'all'");
  app.add_option("--attack", attack, "attack subcommand: attack name");
  app.add_option("--epsilon", epsilon, "attack subcommand: budget (iterations for deepfool)");
  app.add_option("--target", target, "attack subcommand: target class for fgsm_targeted");
  list_option("--activations", activations, "swap: comma-separated substitute activations");
  list_option("--factors", factors, "scale: comma-separated pixel scale factors");
  app.add_option("--clip", clip, "scale: clip scaled pixels to [0,1] (true/false)");
  app.add_option("--slope", slope, "export-features: test-time slope");
  app.add_option("--attack-seed", attack_seed, "seed for attack noise (defaults to --seed)")
      ->each([&](const std::string&) { attack_seed_set = true; });
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--chunk", chunk, "images per work item");

  const std::vector<std::string> about = {
      "train a model at slope 1 and write model.bin plus the training log",
      "clean accuracy of --params at each of --slopes",
      "one attack at one epsilon over --slopes",
      "slope x attack x epsilon grid with a per-slope summary",
      "targeted FGSM for every target class over --slopes and --epsilons",
      "FGSM with each of --activations substituted for the ReLU",
      "FGSM at slope 1 on pixels multiplied by each of --factors",
      "train a slope-1 substitute and transfer its FGSM examples",
      "write penultimate features at --slope as CSV"};
  for (std::size_t i = 0; i < kCommands.size(); ++i) app.add_subcommand(kCommands[i], about[i])->fallthrough();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n" + app.help());
  }

  RunConfig c;
  c.command = app.get_subcommands().front()->get_name();
  if (!seed) throw UsageError("missing required option: seed (--seed)");
  c.seed = *seed;
  c.dataset = dataset;
  const bool mnist = dataset == "mnist";
  c.data_dir = data_dir.empty() ? std::filesystem::path("data") / dataset : std::filesystem::path(data_dir);
  try {
    c.arch = parse_architecture(arch.empty() ? (mnist ? "mnist" : "cifar10-cnn1") : arch);
  } catch (const std::exception& e) {
    throw UsageError(std::string("arch: ") + e.what());
  }
  if ((c.arch == ArchitectureId::MnistCnn) != mnist) {
    throw UsageError("arch " + std::string(architecture_name(c.arch)) + " conflicts with dataset " + dataset);
  }
  if (out.empty()) throw UsageError("missing required option: out (--out)");
  c.out = out;
  if (c.command != "train") {
    if (params.empty()) throw UsageError("missing required option: params (--params) for " + c.command);
    c.params = params;
  }
  c.substitute = substitute;

  c.train.epochs = epochs.value_or(mnist ? 5 : 30);
  c.train.learning_rate = lr;
  c.train.momentum = momentum;
  c.train.batch_size = batch;
  c.train.seed = c.seed;
  c.train.train_slope = static_cast<Real>(train_slope);
  c.train_subset = train_subset;

  try {
    c.grid.slopes = parse_numbers("slopes", slopes);
    c.grid.epsilons = epsilons.empty() ? SweepGrid::default_epsilons(mnist) : parse_numbers("epsilons", epsilons);
    c.grid.attacks.clear();
    for (const auto& a : split_list(attacks)) c.grid.attacks.push_back(parse_attack(a));
    c.grid.deepfool_iterations.clear();
    for (double d : parse_numbers("deepfool-iters", deepfool_iters)) {
      c.grid.deepfool_iterations.push_back(static_cast<int>(d));
    }
    c.grid.seed = attack_seed_set ? attack_seed : c.seed;
    c.grid.validate();
    c.attack = parse_attack(attack);
    c.activations.clear();
    for (const auto& a : split_list(activations)) c.activations.push_back(parse_activation(a));
    c.factors = parse_numbers("factors", factors);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (c.grid.attacks.empty()) throw UsageError("attacks: empty attack list");

  if (images.empty()) {
    // Full test set for the one-step attacks, first 2000 images when the
    // grid includes an iterative attack.
    bool expensive = false;
    for (auto k : c.grid.attacks) {
      expensive |= k == AttackKind::BIM || k == AttackKind::PGD || k == AttackKind::DeepFool;
    }
    if (c.command == "sweep" && expensive) c.grid.image_budget = 2000;
  } else if (images != "all") {
    double n = parse_number("images", images);
    if (!(n >= 1) || n != std::floor(n)) throw UsageError("images: expected a positive integer or 'all'");
    c.grid.image_budget = static_cast<std::size_t>(n);
  }

  c.epsilon = epsilon;
  c.target_class = target;
  if (c.command == "attack") {
    AttackConfig probe = AttackConfig::defaults(c.attack, epsilon);
    probe.target_class = target;
    try {
      probe.validate();
    } catch (const ConfigError& e) {
      throw UsageError(std::string("attack: ") + e.what());
    }
  }
  c.clip = clip;
  c.slope = slope;
  if (!(slope > 0)) throw UsageError("slope: must be positive");
  c.exec.threads = threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : threads;
  c.exec.chunk_images = chunk;
  if (chunk == 0) throw UsageError("chunk: must be positive");
  return c;
}

std::string config_echo(const RunConfig& c) {
  std::string text;
  auto line = [&](const std::string& k, const std::string& v) { text += k + "=" + v + "\n"; };
  std::string attacks, iters, acts;
  for (auto k : c.grid.attacks) attacks += (attacks.empty() ? "" : ",") + std::string(attack_name(k));
  for (int i : c.grid.deepfool_iterations) iters += (iters.empty() ? "" : ",") + std::to_string(i);
  for (auto a : c.activations) acts += (acts.empty() ? "" : ",") + std::string(activation_name(a));
  text += "# " + c.command + "\n";
  line("dataset", c.dataset);
  line("data-dir", c.data_dir.string());
  std::string arch = c.arch == ArchitectureId::MnistCnn      ? "mnist"
                     : c.arch == ArchitectureId::Cifar10Cnn1 ? "cifar10-cnn1"
                                                             : "cifar10-cnn2";
  line("arch", arch);
  if (!c.params.empty()) line("params", c.params.string());
  if (!c.substitute.empty()) line("substitute", c.substitute.string());
  line("out", c.out.string());
  line("seed", std::to_string(c.seed));
  line("epochs", std::to_string(c.train.epochs));
  line("lr", join_numbers({c.train.learning_rate}));
  line("momentum", join_numbers({c.train.momentum}));
  line("batch-size", std::to_string(c.train.batch_size));
  line("train-slope", join_numbers({static_cast<double>(c.train.train_slope)}));
  if (c.train_subset) line("train-subset", std::to_string(*c.train_subset));
  line("slopes", join_numbers(c.grid.slopes));
  line("epsilons", join_numbers(c.grid.epsilons));
  line("attacks", attacks);
  line("deepfool-iters", iters);
  line("images", c.grid.image_budget ? std::to_string(*c.grid.image_budget) : "all");
  line("attack-seed", std::to_string(c.grid.seed));
  line("attack", std::string(attack_name(c.attack)));
  line("epsilon", join_numbers({c.epsilon}));
  if (c.target_class) line("target", std::to_string(*c.target_class));
  line("activations", acts);
  line("factors", join_numbers(c.factors));
  line("clip", c.clip ? "true" : "false");
  line("slope", join_numbers({c.slope}));
  line("chunk", std::to_string(c.exec.chunk_images));
  return text;
}

void execute(const RunConfig& c) {
  std::string stage = "checking inputs";
  try {
    for (const auto& p : required_inputs(c)) {
      if (!std::filesystem::is_regular_file(p)) throw std::runtime_error("missing input file " + p.string());
    }
    stage = "preparing output directory";
    std::filesystem::create_directories(c.out);
    write_text_file(c.out / "config.txt", config_echo(c));
    stage = c.command;
    run_command(c);
  } catch (const std::exception& e) {
    throw std::runtime_error(stage + ": " + e.what());
  }
}

namespace {

void run_command(const RunConfig& c) {
  RunWriter w{c, {}, {"config.txt"}};

  if (c.command == "train") {
    LabeledImageSet train_set = load_set(c, true);
    if (c.train_subset) train_set = take_first(train_set, std::min(*c.train_subset, train_set.size()));
    const LabeledImageSet test_set = load_set(c, false);
    auto result = train_from_scratch(ArchitectureSpec::get(c.arch), train_set, c.train);
    save_params(result.model, c.out / "model.bin");
    w.outputs.push_back("model.bin");
    w.write("train_log.csv", train_log_csv(result.log));
    w.add_report("eval", clean_report(result.model.with_train_slope(1), test_set, {1}, c.exec), false);
    w.manifest.push_back({"train_images", std::to_string(train_set.size())});
  } else if (c.command == "eval") {
    auto model = load_model(c, c.params);
    w.add_report("eval", clean_report(model, budget_set(load_set(c, false), c.grid), c.grid.slopes, c.exec), false);
  } else if (c.command == "attack") {
    auto model = load_model(c, c.params);
    const LabeledImageSet set = budget_set(load_set(c, false), c.grid);
    AttackConfig config = AttackConfig::defaults(c.attack, c.epsilon);
    config.target_class = c.target_class;
    config.rng_seed = c.grid.seed;
    Report report;
    for (double s : c.grid.slopes) {
      report.records.push_back(eval_under_attack(model.with_test_slope(static_cast<Real>(s)), set, config, c.exec));
    }
    normalize(report);
    w.add_report("attack", report, false);
  } else if (c.command == "sweep") {
    auto model = load_model(c, c.params);
    w.add_report("sweep", slope_sweep(model, load_set(c, false), c.grid, c.exec), true);
  } else if (c.command == "targeted-sweep") {
    auto model = load_model(c, c.params);
    w.add_report("targeted", targeted_sweep(model, load_set(c, false), c.grid, c.exec), true);
  } else if (c.command == "swap") {
    auto model = load_model(c, c.params);
    std::vector<ActivationKind> kinds{ActivationKind::SReLU};
    for (auto k : c.activations) {
      if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
    }
    w.add_report("swap", activation_swap(model, load_set(c, false), kinds, c.grid, c.exec), false);
  } else if (c.command == "scale") {
    auto model = load_model(c, c.params);
    w.add_report("scale", scaling_experiment(model, load_set(c, false), c.factors, c.clip, c.grid, c.exec), true);
  } else if (c.command == "bpda") {
    auto model = load_model(c, c.params);
    Model substitute = model;
    if (!c.substitute.empty()) {
      substitute = load_model(c, c.substitute);
    } else {
      LabeledImageSet train_set = load_set(c, true);
      if (c.train_subset) train_set = take_first(train_set, std::min(*c.train_subset, train_set.size()));
      auto result = bpda_train_substitute(model, train_set, c.train);
      substitute = result.model;
      save_params(substitute, c.out / "substitute.bin");
      w.outputs.push_back("substitute.bin");
      w.write("substitute_train_log.csv", train_log_csv(result.log));
    }
    w.add_report("bpda", bpda_transfer_eval(model, substitute, load_set(c, false), c.grid, c.exec), true);
  } else if (c.command == "export-features") {
    auto model = load_model(c, c.params).with_test_slope(static_cast<Real>(c.slope));
    w.write("features.csv", features_csv(model, budget_set(load_set(c, false), c.grid), c.exec));
  } else {
    throw UsageError("unknown command " + c.command);
  }
  w.finish();
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  RunConfig config;
  try {
    config = parse_run_config(args);
  } catch (const HelpRequested& h) {
    std::cout << h.what();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  try {
    execute(config);
  } catch (const std::exception& e) {
    std::cerr << config.command << " failed while " << e.what() << "\n";
    return 1;
  }
  return 0;
}

SRELU_NAMESPACE_END
