#pragma once

#include "mpfair/data.hpp"
#include "mpfair/errors.hpp"
#include "mpfair/fair_subspace.hpp"
#include "mpfair/kernels.hpp"
#include "mpfair/metrics.hpp"
#include "mpfair/solvers.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mpfair {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvariantFailure = 1,
  kExitInputError = 2,
  kExitAssumptionViolated = 3,
};

struct CsvDataConfig {
  std::string path;
  CsvSchema schema;
};

struct GradientConfig {
  LossSpec loss = SquaredLoss{};
  OptimizerConfig optimizer;
};

struct ExperimentConfig {
  std::variant<SyntheticConfig, CsvDataConfig> data = SyntheticConfig{};
  std::optional<std::size_t> subsample;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  BaseKernel x_kernel = LinearKernel{};
  std::optional<BaseKernel> s_kernel;  // unset: DeltaGroup
  Composition mode = Composition::Sum;
  std::optional<double> lambda;        // unset: 0 for linear x-kernels, 1 for rbf
  std::vector<std::string> methods = {"constant", "unconstrained", "fair"};
  std::vector<double> fpr_zetas = {10.0, 1000.0};
  std::vector<double> alphas;  // unset: 0, 1/50, ..., 1
  GradientConfig gradient;
  std::size_t bins = 30;
  double rtol = kDefaultRtol;
  std::string out_dir = "out";
  nlohmann::json source;  // the document this config was parsed from

  double effective_lambda() const;
  std::vector<double> effective_alphas() const;
};

/// Thrown for malformed configuration documents; maps to kExitInputError.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Thrown by fit-eval and friends when the sensitive kernel fails the
/// centered-rank condition; maps to kExitAssumptionViolated.
class AssumptionViolation : public Error {
 public:
  AssumptionViolation(const std::string& what, Assumption1Check check)
      : Error(what), check_(check) {}
  const Assumption1Check& check() const noexcept { return check_; }

 private:
  Assumption1Check check_;
};

ExperimentConfig parse_config(const nlohmann::json& doc);

/// Applies `key.path=value` to a config document. The value is read as JSON
/// when it parses, otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Everything the pipelines share: data splits, Gram matrices and the fair
/// projection built on the training split.
struct PreparedRun {
  ExperimentConfig config;
  DataSet full;
  Centered data;  // target-centered splits
  std::vector<int> test_missing_groups;
  std::vector<int> train_codes;
  std::vector<int> test_codes;
  KernelSpec kernel;
  KernelSpec s_kernel;
  Matrix k_train;
  Matrix k_test;  // |test| x |train|
  Matrix ks_train;
  Matrix ks_test;
  Assumption1Check assumption;
  FairBasis basis;
  ProjectionMatrix projection;
  KernelSpectrum spectrum;  // of k_train, shared by the closed-form fits
  double lambda = 0.0;
};

/// Loads or generates data, subsamples, splits, centers targets and builds
/// Grams plus the fair projection. Never throws AssumptionViolation; the
/// caller decides what to do with `assumption`.
PreparedRun prepare(const ExperimentConfig& config);

struct MethodResult {
  std::string name;
  std::string family;  // constant, unconstrained, fair, fpr, tradeoff, gradient
  double param = 0.0;  // zeta or alpha where relevant
  std::optional<MetricReport> train;
  std::optional<MetricReport> test;
  Vector weights;
  Vector train_pred;  // centered scale
  Vector test_pred;
  double seconds = 0.0;
  std::string error;
};

struct CommandResult {
  int exit_code = kExitOk;
  nlohmann::json report;
  std::vector<MethodResult> methods;
};

CommandResult cmd_fit_eval(const ExperimentConfig& config);
CommandResult cmd_tradeoff(const ExperimentConfig& config);
CommandResult cmd_histograms(const ExperimentConfig& config);
CommandResult cmd_check(const ExperimentConfig& config);
CommandResult cmd_gen_synthetic(const ExperimentConfig& config);

}  // namespace mpfair
