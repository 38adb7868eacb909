// Command-line front end for mean-parity fair kernel regression experiments.

#include "mpfair/errors.hpp"
#include "mpfair/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bins;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON experiment configuration");
  cmd->add_option("--set", opts.overrides, "Override a config field, e.g. --set data.n=400")
      ->take_all();
  cmd->add_option("--out-dir", opts.out_dir, "Directory for result files");
  cmd->add_option("--seed", opts.seed, "Master random seed");
}

mpfair::ExperimentConfig load(const CommonOptions& opts) {
  nlohmann::json doc = nlohmann::json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw mpfair::ConfigError("cannot open config '" + opts.config_path + "'");
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw mpfair::ConfigError("config '" + opts.config_path + "' is not valid JSON");
  }
  for (const auto& o : opts.overrides) mpfair::apply_override(doc, o);
  if (opts.out_dir) doc["out_dir"] = *opts.out_dir;
  if (opts.seed) doc["seed"] = *opts.seed;
  if (opts.bins) doc["histograms"]["bins"] = *opts.bins;
  return mpfair::parse_config(doc);
}

int run(const CommonOptions& opts,
        const std::function<mpfair::CommandResult(const mpfair::ExperimentConfig&)>& command) {
  try {
    const mpfair::ExperimentConfig cfg = load(opts);
    const mpfair::CommandResult result = command(cfg);
    for (const auto& m : result.methods) {
      if (!m.error.empty()) std::cerr << "method " << m.name << " failed: " << m.error << '\n';
    }
    if (result.report.contains("data") && result.report["data"].contains("rejected_rows") &&
        !result.report["data"]["rejected_rows"].empty()) {
      std::cerr << "rejected CSV rows (line numbers): " << result.report["data"]["rejected_rows"].dump()
                << '\n';
    }
    std::cout << "results written to " << cfg.out_dir << '\n';
    return result.exit_code;
  } catch (const mpfair::AssumptionViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mpfair::kExitAssumptionViolated;
  } catch (const mpfair::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  } catch (const mpfair::SchemaError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  } catch (const mpfair::MissingGroupError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  } catch (const mpfair::SplitError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  } catch (const mpfair::RangeError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  } catch (const mpfair::DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  } catch (const mpfair::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mpfair::kExitInvariantFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return mpfair::kExitInputError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-parity fair regression in reproducing-kernel Hilbert spaces"};
  app.set_version_flag("--version", mpfair::kVersion);
  app.require_subcommand(1);

  CommonOptions fit_opts, trade_opts, hist_opts, check_opts, gen_opts;
  auto* fit = app.add_subcommand("fit-eval", "Fit the configured methods and write metrics");
  add_common(fit, fit_opts);
  auto* trade = app.add_subcommand("tradeoff", "Sweep the fairness-accuracy interpolation");
  add_common(trade, trade_opts);
  auto* hist = app.add_subcommand("histograms", "Per-group histograms of y and fair predictions");
  add_common(hist, hist_opts);
  hist->add_option("--bins", hist_opts.bins, "Number of histogram bins");
  auto* check = app.add_subcommand("check", "Run the invariant suite on the configured instance");
  add_common(check, check_opts);
  auto* gen = app.add_subcommand("gen-synthetic", "Write the configured synthetic dataset as CSV");
  add_common(gen, gen_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mpfair::kExitInputError;
  }

  if (*fit) return run(fit_opts, mpfair::cmd_fit_eval);
  if (*trade) return run(trade_opts, mpfair::cmd_tradeoff);
  if (*hist) return run(hist_opts, mpfair::cmd_histograms);
  if (*check) return run(check_opts, mpfair::cmd_check);
  return run(gen_opts, mpfair::cmd_gen_synthetic);
}
