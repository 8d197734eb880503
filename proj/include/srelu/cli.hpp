#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srelu/experiments.hpp"

SRELU_NAMESPACE_BEGIN

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr int kReportFormatVersion = 1;

/// Bad command line or config file; main() maps it to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// --help was given; `what()` carries the help text.
struct HelpRequested : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string dataset = "mnist";  // mnist | cifar10
  std::filesystem::path data_dir;
  ArchitectureId arch = ArchitectureId::MnistCnn;
  std::filesystem::path params;      // model to evaluate (all but train)
  std::filesystem::path substitute;  // bpda: pretrained substitute, optional
  std::filesystem::path out;
  std::uint64_t seed = 0;

  TrainConfig train;
  std::optional<std::size_t> train_subset;  // first N training images

  SweepGrid grid;
  AttackKind attack = AttackKind::FGSM;  // `attack` subcommand
  double epsilon = 0;
  std::optional<int> target_class;
  std::vector<ActivationKind> activations;
  std::vector<double> factors;
  bool clip = true;
  double slope = 1;  // export-features

  ExecutionOptions exec;
};

/// Parses argv (argv[0] is the program name). Options may come from a
/// key=value file named by --config; flags given on the command line win.
/// Throws UsageError naming the offending field, or HelpRequested.
RunConfig parse_run_config(const std::vector<std::string>& args);

/// Resolved configuration as key = value lines, readable back via --config.
/// Thread counts are left out because they never affect results.
std::string config_echo(const RunConfig& config);

/// Runs the configured command, writing its artifacts into config.out.
/// Throws on data, file or experiment failures.
void execute(const RunConfig& config);

/// Full entry point: parsing, execution and exit codes (0 ok, 1 data or file
/// error, 2 usage error). Messages name the failing stage.
int run_cli(const std::vector<std::string>& args);

SRELU_NAMESPACE_END
