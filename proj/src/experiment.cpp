#include "mpfair/experiment.hpp"

#include "mpfair/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace mpfair {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const std::set<std::string> kMethodFamilies = {"constant", "unconstrained", "fair",
                                               "fpr",      "tradeoff",      "gradient"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

BaseKernel parse_x_kernel(const json& j) {
  reject_unknown(j, {"kind", "gamma"}, "kernel.x");
  const std::string kind = j.value("kind", "linear");
  if (kind == "linear") return LinearKernel{};
  if (kind == "rbf") return RbfKernel{j.value("gamma", 0.1)};
  throw ConfigError("kernel.x.kind must be 'linear' or 'rbf', got '" + kind + "'");
}

// Polynomial degree 0 means "k - 1, resolved once the data is known".
BaseKernel parse_s_kernel(const json& j) {
  reject_unknown(j, {"kind", "degree", "offset"}, "kernel.s");
  const std::string kind = j.value("kind", "delta");
  if (kind == "delta") return DeltaGroupKernel{};
  if (kind == "linear") return PolynomialKernel{1, 0.0};
  if (kind == "polynomial") return PolynomialKernel{j.value("degree", 0), j.value("offset", 1.0)};
  throw ConfigError("kernel.s.kind must be 'delta', 'polynomial' or 'linear', got '" + kind + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json number_or_null(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

json report_json(const MetricReport& r) {
  json groups = json::array();
  for (const auto& m : r.per_group_means) groups.push_back(number_or_null(m));
  return json{{"mse", r.mse},
              {"smd", r.smd},
              {"mpd", r.mpd},
              {"dpd", number_or_null(r.dpd)},
              {"cov_norm", number_or_null(r.cov_norm)},
              {"per_group_means", groups}};
}

std::filesystem::path ensure_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json base_report(const PreparedRun& run, const std::string& command) {
  json data{{"n_total", run.full.size()},
            {"n_train", run.data.train.size()},
            {"n_test", run.data.test.size()},
            {"k", run.full.k},
            {"target_mean", run.data.mean},
            {"test_missing_groups", run.test_missing_groups}};
  std::visit(overloaded{
                 [&](const SyntheticSource& s) {
                   data["source"] = "synthetic";
                   data["generation_attempts"] = s.attempts;
                 },
                 [&](const CsvSource& s) {
                   data["source"] = "csv";
                   data["path"] = s.path;
                   data["rejected_rows"] = s.rejected_rows;
                 },
             },
             run.full.provenance);
  const std::uint64_t seed = run.config.seed;
  std::vector<double> eig(run.basis.eigenvalues.data(),
                          run.basis.eigenvalues.data() + run.basis.eigenvalues.size());
  return json{
      {"command", command},
      {"version", kVersion},
      {"config", run.config.source},
      {"seeds",
       {{"master", seed},
        {"data", derive_seed(seed, "data")},
        {"subsample", derive_seed(seed, "subsample")},
        {"split", derive_seed(seed, "split")}}},
      {"data", data},
      {"kernel", describe(run.kernel)},
      {"sensitive_kernel", describe(run.s_kernel)},
      {"lambda", run.lambda},
      {"assumption1",
       {{"satisfied", run.assumption.satisfied},
        {"centered_rank", run.assumption.centered_rank},
        {"k", run.assumption.k}}},
      {"fair_basis", {{"m", run.basis.m}, {"eigenvalues", eig}}},
  };
}

void require_assumption(const PreparedRun& run) {
  if (!run.assumption.satisfied) {
    throw AssumptionViolation("sensitive kernel fails the centered-rank condition: rank " +
                                  std::to_string(run.assumption.centered_rank) + " but k - 1 = " +
                                  std::to_string(run.assumption.k - 1),
                              run.assumption);
  }
}

MethodResult evaluate_weights(const PreparedRun& run, std::string name, std::string family,
                              double param, Vector weights) {
  MethodResult r;
  r.name = std::move(name);
  r.family = std::move(family);
  r.param = param;
  r.weights = std::move(weights);
  if (r.weights.size() == 0) {
    r.train_pred = Vector::Zero(static_cast<Eigen::Index>(run.data.train.size()));
    r.test_pred = Vector::Zero(static_cast<Eigen::Index>(run.data.test.size()));
  } else {
    r.train_pred = run.k_train * r.weights;
    r.test_pred = run.data.test.size() > 0 ? Vector(run.k_test * r.weights) : Vector(0);
  }
  r.train = evaluate(r.train_pred, run.data.train.y, run.train_codes, run.full.k, Split::Train,
                     &run.ks_train);
  if (run.data.test.size() > 0) {
    r.test = evaluate(r.test_pred, run.data.test.y, run.test_codes, run.full.k, Split::Test,
                      &run.ks_test);
  }
  return r;
}

template <class Fn>
MethodResult timed(const std::string& name, const std::string& family, double param, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  MethodResult r;
  try {
    r = fn();
  } catch (const Error& e) {
    r = MethodResult{};
    r.name = name;
    r.family = family;
    r.param = param;
    r.error = e.what();
  }
  r.seconds = seconds_since(start);
  return r;
}

bool wants(const ExperimentConfig& cfg, const std::string& family) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), family) != cfg.methods.end();
}

std::string tradeoff_name(double alpha) { return variant_name(Tradeoff{alpha}); }

json methods_json(const std::vector<MethodResult>& results) {
  json out = json::array();
  for (const auto& r : results) {
    json m{{"method", r.name}, {"timing_seconds", r.seconds}};
    if (!r.error.empty()) {
      m["error"] = r.error;
    } else {
      if (r.train) m["train"] = report_json(*r.train);
      if (r.test) m["test"] = report_json(*r.test);
    }
    out.push_back(m);
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MethodResult>& results) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << "method,split,mse,smd,dpd,cov_norm\n";
  auto row = [&](const std::string& name, const char* split, const MetricReport& m) {
    out << name << ',' << split << ',' << format_double(m.mse) << ',' << format_double(m.smd) << ','
        << (m.dpd ? format_double(*m.dpd) : "") << ','
        << (m.cov_norm ? format_double(*m.cov_norm) : "") << '\n';
  };
  for (const auto& r : results) {
    if (r.train) row(r.name, "train", *r.train);
    if (r.test) row(r.name, "test", *r.test);
  }
}

Vector run_gradient(const PreparedRun& run) {
  return fit_gradient(run.k_train, run.projection, run.data.train.y, run.config.gradient.loss,
                      run.config.gradient.optimizer, derive_seed(run.config.seed, "gradient"));
}

// Writes per-group normalised histograms of `values`; bin edges are shared
// across groups and span the pooled range.
void write_histogram(const std::filesystem::path& path, const Vector& values,
                     const std::vector<int>& codes, std::size_t k, std::size_t bins) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << "group,bin_left,bin_right,density\n";
  if (values.size() == 0) return;
  double lo = values.minCoeff();
  double hi = values.maxCoeff();
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<double> counts(bins, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < codes.size(); ++i) {
      if (codes[i] != static_cast<int>(g)) continue;
      auto b = static_cast<std::size_t>(
          std::floor((values(static_cast<Eigen::Index>(i)) - lo) / width));
      b = std::min(b, bins - 1);
      counts[b] += 1.0;
      total += 1.0;
    }
    if (total == 0.0) continue;
    for (std::size_t b = 0; b < bins; ++b) {
      const double left = lo + width * static_cast<double>(b);
      const double right = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
      out << g << ',' << format_double(left) << ',' << format_double(right) << ','
          << format_double(counts[b] / (total * (right - left))) << '\n';
    }
  }
}

}  // namespace

double ExperimentConfig::effective_lambda() const {
  if (lambda) return *lambda;
  return std::holds_alternative<RbfKernel>(x_kernel) ? 1.0 : 0.0;
}

std::vector<double> ExperimentConfig::effective_alphas() const {
  if (!alphas.empty()) return alphas;
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(static_cast<double>(i) / 50.0);
  return grid;
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.source = doc;
  try {
    reject_unknown(doc,
                   {"data", "subsample", "split", "seed", "kernel", "lambda", "methods", "fpr",
                    "tradeoff", "gradient", "histograms", "rtol", "out_dir"},
                   "config");
    if (doc.contains("data")) {
      const json& d = doc.at("data");
      const std::string source = d.value("source", "synthetic");
      if (source == "synthetic") {
        reject_unknown(d, {"source", "n", "d", "e", "noise_sd", "link"}, "data");
        SyntheticConfig s;
        s.n = d.value("n", s.n);
        s.d = d.value("d", s.d);
        s.e = d.value("e", s.e);
        s.noise_sd = d.value("noise_sd", s.noise_sd);
        const std::string link = d.value("link", "linear");
        if (link == "linear") {
          s.link = Link::Linear;
        } else if (link == "sine") {
          s.link = Link::Sine;
        } else {
          throw ConfigError("data.link must be 'linear' or 'sine'");
        }
        cfg.data = s;
      } else if (source == "csv") {
        reject_unknown(d, {"source", "path", "target", "sensitive", "features", "binarize"}, "data");
        CsvDataConfig c;
        c.path = d.at("path").get<std::string>();
        c.schema.target_column = d.at("target").get<std::string>();
        c.schema.sensitive_columns = d.value("sensitive", std::vector<std::string>{});
        if (d.contains("features") && d.at("features").is_array()) {
          c.schema.feature_columns = d.at("features").get<std::vector<std::string>>();
        } else if (d.contains("features") && d.at("features") != "all") {
          throw ConfigError("data.features must be a list of column names or \"all\"");
        }
        if (d.contains("binarize")) {
          c.schema.binarize = d.at("binarize").get<std::map<std::string, double>>();
        }
        cfg.data = c;
      } else {
        throw ConfigError("data.source must be 'synthetic' or 'csv'");
      }
    }
    if (doc.contains("subsample") && !doc.at("subsample").is_null()) {
      cfg.subsample = doc.at("subsample").get<std::size_t>();
    }
    if (doc.contains("split")) {
      reject_unknown(doc.at("split"), {"train_fraction"}, "split");
      cfg.train_fraction = doc.at("split").value("train_fraction", cfg.train_fraction);
    }
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("kernel")) {
      const json& k = doc.at("kernel");
      reject_unknown(k, {"x", "s", "mode"}, "kernel");
      if (k.contains("x")) cfg.x_kernel = parse_x_kernel(k.at("x"));
      if (k.contains("s")) cfg.s_kernel = parse_s_kernel(k.at("s"));
      const std::string mode = k.value("mode", "sum");
      if (mode == "sum") {
        cfg.mode = Composition::Sum;
      } else if (mode == "ignore_s") {
        cfg.mode = Composition::IgnoreS;
      } else {
        throw ConfigError("kernel.mode must be 'sum' or 'ignore_s'");
      }
    }
    if (doc.contains("lambda") && !doc.at("lambda").is_null()) {
      cfg.lambda = doc.at("lambda").get<double>();
      if (!(*cfg.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    }
    if (doc.contains("methods")) cfg.methods = doc.at("methods").get<std::vector<std::string>>();
    if (cfg.methods.empty()) throw ConfigError("at least one method is required");
    for (const auto& m : cfg.methods) {
      if (kMethodFamilies.count(m) == 0) throw ConfigError("unknown method '" + m + "'");
    }
    if (doc.contains("fpr")) {
      reject_unknown(doc.at("fpr"), {"zetas"}, "fpr");
      cfg.fpr_zetas = doc.at("fpr").value("zetas", cfg.fpr_zetas);
      for (double z : cfg.fpr_zetas) {
        if (!(z >= 0.0)) throw ConfigError("fpr.zetas must be >= 0");
      }
    }
    if (doc.contains("tradeoff")) {
      const json& t = doc.at("tradeoff");
      reject_unknown(t, {"alphas", "steps"}, "tradeoff");
      if (t.contains("alphas")) {
        cfg.alphas = t.at("alphas").get<std::vector<double>>();
      } else if (t.contains("steps")) {
        const int steps = t.at("steps").get<int>();
        if (steps < 1) throw ConfigError("tradeoff.steps must be >= 1");
        for (int i = 0; i <= steps; ++i) cfg.alphas.push_back(static_cast<double>(i) / steps);
      }
      for (double a : cfg.alphas) {
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("tradeoff alphas must lie in [0, 1]");
      }
    }
    if (doc.contains("gradient")) {
      const json& g = doc.at("gradient");
      reject_unknown(g,
                     {"loss", "beta", "optimizer", "step", "beta1", "beta2", "epsilon", "max_iters",
                      "grad_tol"},
                     "gradient");
      const std::string loss = g.value("loss", "squared");
      if (loss == "squared") {
        cfg.gradient.loss = SquaredLoss{};
      } else if (loss == "smooth_l1") {
        cfg.gradient.loss = SmoothL1Loss{g.value("beta", 1.0)};
      } else {
        throw ConfigError("gradient.loss must be 'squared' or 'smooth_l1'");
      }
      const std::string opt = g.value("optimizer", "adam");
      if (opt == "adam") {
        AdaptiveMoment a;
        a.step = g.value("step", a.step);
        a.beta1 = g.value("beta1", a.beta1);
        a.beta2 = g.value("beta2", a.beta2);
        a.epsilon = g.value("epsilon", a.epsilon);
        cfg.gradient.optimizer.kind = a;
      } else if (opt == "gd") {
        cfg.gradient.optimizer.kind = FixedStepGradient{g.value("step", 1e-4)};
      } else {
        throw ConfigError("gradient.optimizer must be 'adam' or 'gd'");
      }
      cfg.gradient.optimizer.max_iters = g.value("max_iters", cfg.gradient.optimizer.max_iters);
      cfg.gradient.optimizer.grad_tol = g.value("grad_tol", cfg.gradient.optimizer.grad_tol);
    }
    if (doc.contains("histograms")) {
      reject_unknown(doc.at("histograms"), {"bins"}, "histograms");
      cfg.bins = doc.at("histograms").value("bins", cfg.bins);
    }
    cfg.rtol = doc.value("rtol", cfg.rtol);
    if (!(cfg.rtol > 0.0)) throw ConfigError("rtol must be positive");
    cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must lie in (0, 1)");
  }
  return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("--set: empty path segment in '" + key + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("--set: '" + key + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

PreparedRun prepare(const ExperimentConfig& config) {
  PreparedRun run;
  run.config = config;
  const std::uint64_t seed = config.seed;

  run.full = std::visit(overloaded{
                            [&](const SyntheticConfig& s) {
                              return gen_synthetic(s, derive_seed(seed, "data"));
                            },
                            [&](const CsvDataConfig& c) { return load_csv(c.path, c.schema); },
                        },
                        config.data);
  if (config.subsample) run.full = subsample(run.full, *config.subsample, derive_seed(seed, "subsample"));

  SplitResult parts = split(run.full, config.train_fraction, derive_seed(seed, "split"));
  run.test_missing_groups = parts.test_missing_groups;
  run.data = center_targets(parts.train, parts.test);
  run.train_codes = run.data.train.group_codes();
  run.test_codes = run.data.test.group_codes();

  BaseKernel s_part = config.s_kernel.value_or(DeltaGroupKernel{});
  if (auto* poly = std::get_if<PolynomialKernel>(&s_part); poly && poly->degree == 0) {
    const double offset = poly->offset;
    *poly = std::get<PolynomialKernel>(default_sensitive_kernel(run.full.k, SensitiveFlavor::Polynomial));
    poly->offset = offset;
  }
  std::visit([&](const auto& k) { run.s_kernel = k; }, s_part);
  run.kernel = ComposedKernel{config.x_kernel, s_part, config.mode};
  validate(run.kernel);

  run.k_train = gram(run.kernel, run.data.train.rows);
  run.ks_train = gram(run.s_kernel, run.data.train.rows);
  if (run.data.test.size() > 0) {
    run.k_test = cross_gram(run.kernel, run.data.train.rows, run.data.test.rows);
    run.ks_test = gram(run.s_kernel, run.data.test.rows);
  }
  const EigenResult centered_ks = centered_sensitive_spectrum(run.ks_train);
  run.assumption = check_assumption1(centered_ks, run.train_codes, config.rtol);
  run.basis = build_fair_basis(run.k_train, run.ks_train, centered_ks, config.rtol);
  run.projection = projection_matrix(run.basis, run.k_train);
  run.spectrum = kernel_spectrum(run.k_train);
  run.lambda = config.effective_lambda();
  return run;
}

CommandResult cmd_fit_eval(const ExperimentConfig& config) {
  const PreparedRun run = prepare(config);
  require_assumption(run);
  const auto dir = ensure_out_dir(config);
  const double rtol = config.rtol;
  const Vector& y = run.data.train.y;

  std::vector<MethodResult> results;
  std::optional<Vector> w_star;
  std::optional<Vector> w_fair;
  int solver_fits = 0;
  auto star = [&]() -> const Vector& {
    if (!w_star) {
      w_star = fit_unconstrained(run.spectrum, y, run.lambda, rtol);
      ++solver_fits;
    }
    return *w_star;
  };
  auto fair = [&]() -> const Vector& {
    if (!w_fair) {
      w_fair = fit_fair(run.spectrum, y, run.lambda, run.basis, rtol);
      ++solver_fits;
    }
    return *w_fair;
  };

  if (wants(config, "constant")) {
    results.push_back(timed("constant", "constant", 0.0, [&] {
      return evaluate_weights(run, "constant", "constant", 0.0, Vector(0));
    }));
  }
  if (wants(config, "unconstrained")) {
    results.push_back(timed("unconstrained", "unconstrained", 0.0, [&] {
      return evaluate_weights(run, "unconstrained", "unconstrained", 0.0, star());
    }));
  }
  if (wants(config, "fair")) {
    results.push_back(timed("fair", "fair", 0.0,
                            [&] { return evaluate_weights(run, "fair", "fair", 0.0, fair()); }));
  }
  if (wants(config, "fpr")) {
    for (double zeta : config.fpr_zetas) {
      const std::string name = variant_name(Fpr{zeta});
      results.push_back(timed(name, "fpr", zeta, [&] {
        ++solver_fits;
        return evaluate_weights(run, name, "fpr", zeta,
                                fit_fpr(run.spectrum, y, run.lambda, zeta, run.basis, rtol));
      }));
    }
  }
  if (wants(config, "tradeoff")) {
    for (double alpha : config.effective_alphas()) {
      const std::string name = tradeoff_name(alpha);
      results.push_back(timed(name, "tradeoff", alpha, [&] {
        return evaluate_weights(run, name, "tradeoff", alpha, fit_tradeoff(fair(), star(), alpha));
      }));
    }
  }
  if (wants(config, "gradient")) {
    const std::string name = variant_name(GradientFair{config.gradient.loss});
    results.push_back(timed(name, "gradient", 0.0, [&] {
      ++solver_fits;
      return evaluate_weights(run, name, "gradient", 0.0, run_gradient(run));
    }));
  }

  std::stable_sort(results.begin(), results.end(), [](const MethodResult& a, const MethodResult& b) {
    if (a.family != b.family) return a.family < b.family;
    return a.param < b.param;
  });
  write_metrics_csv(dir / "metrics.csv", results);

  CommandResult out;
  out.report = base_report(run, "fit-eval");
  out.report["methods"] = methods_json(results);
  out.report["solver_fits"] = solver_fits;
  write_json(dir / "report.json", out.report);
  out.methods = std::move(results);
  for (const auto& r : out.methods) {
    if (!r.error.empty()) out.exit_code = kExitInvariantFailure;
  }
  return out;
}

CommandResult cmd_tradeoff(const ExperimentConfig& config) {
  const PreparedRun run = prepare(config);
  require_assumption(run);
  const auto dir = ensure_out_dir(config);
  const Vector& y = run.data.train.y;

  // The whole curve needs exactly two solves.
  const Vector w_star = fit_unconstrained(run.spectrum, y, run.lambda, config.rtol);
  const Vector w_fair = fit_fair(run.spectrum, y, run.lambda, run.basis, config.rtol);

  std::vector<double> alphas = config.effective_alphas();
  std::sort(alphas.begin(), alphas.end());
  std::vector<MethodResult> rows;
  for (double alpha : alphas) {
    const auto start = std::chrono::steady_clock::now();
    MethodResult r = evaluate_weights(run, tradeoff_name(alpha), "tradeoff", alpha,
                                      fit_tradeoff(w_fair, w_star, alpha));
    r.seconds = seconds_since(start);
    rows.push_back(std::move(r));
  }

  const Vector pred_star = run.k_train * w_star;
  const Vector pred_fair = run.k_train * w_fair;
  const double loss_star = mse(pred_star, y);
  const double loss_fair = mse(pred_fair, y);
  const double mpd_star = mpd(pred_star, run.train_codes);
  const double pred_scale = std::sqrt(pred_star.squaredNorm() / static_cast<double>(pred_star.size()));
  const bool assert_identities = run.lambda == 0.0;

  std::ofstream csv(dir / "tradeoff.csv");
  if (!csv) throw SchemaError("cannot write tradeoff.csv");
  csv << "alpha,mse_train,mse_test,smd_train,smd_test\n";
  json identity_rows = json::array();
  std::vector<double> failed;
  for (const auto& r : rows) {
    const double a = r.param;
    csv << format_double(a) << ',' << format_double(r.train->mse) << ','
        << (r.test ? format_double(r.test->mse) : "") << ',' << format_double(r.train->smd) << ','
        << (r.test ? format_double(r.test->smd) : "") << '\n';

    const double expected_loss = (1 - a) * (1 - a) * loss_fair + (1 - (1 - a) * (1 - a)) * loss_star;
    const double loss_gap = std::abs(r.train->mse - expected_loss);
    const double mpd_gap = std::abs(r.train->mpd - a * mpd_star);
    const bool ok = loss_gap <= 1e-8 * loss_star + 1e-15 &&
                    mpd_gap <= 1e-8 * mpd_star + 1e-12 * pred_scale;
    if (!ok) failed.push_back(a);
    identity_rows.push_back({{"alpha", a}, {"mse_gap", loss_gap}, {"mpd_gap", mpd_gap}, {"pass", ok}});
  }

  CommandResult out;
  out.report = base_report(run, "tradeoff");
  out.report["solver_fits"] = 2;
  out.report["identities"] = {{"asserted", assert_identities},
                              {"mse_train_fair", loss_fair},
                              {"mse_train_unconstrained", loss_star},
                              {"mpd_train_unconstrained", mpd_star},
                              {"rows", identity_rows},
                              {"failed_alphas", failed}};
  out.report["methods"] = methods_json(rows);
  write_json(dir / "report.json", out.report);
  out.methods = std::move(rows);
  if (assert_identities && !failed.empty()) {
    std::cerr << "tradeoff identities failed at alpha:";
    for (double a : failed) std::cerr << ' ' << a;
    std::cerr << '\n';
    out.exit_code = kExitInvariantFailure;
  }
  return out;
}

CommandResult cmd_histograms(const ExperimentConfig& config) {
  if (config.bins < 2) throw RangeError("histograms: bins must be at least 2");
  const PreparedRun run = prepare(config);
  require_assumption(run);
  const auto dir = ensure_out_dir(config);

  const Vector w_fair = fit_fair(run.spectrum, run.data.train.y, run.lambda, run.basis, config.rtol);
  MethodResult fair = evaluate_weights(run, "fair", "fair", 0.0, w_fair);
  const double mean = run.data.mean;
  auto shifted = [mean](const Vector& v) -> Vector { return v.array() + mean; };

  write_histogram(dir / "hist_y_train.csv", shifted(run.data.train.y), run.train_codes, run.full.k,
                  config.bins);
  write_histogram(dir / "hist_yhat_train.csv", shifted(fair.train_pred), run.train_codes,
                  run.full.k, config.bins);
  write_histogram(dir / "hist_y_test.csv", shifted(run.data.test.y), run.test_codes, run.full.k,
                  config.bins);
  write_histogram(dir / "hist_yhat_test.csv", shifted(fair.test_pred), run.test_codes, run.full.k,
                  config.bins);

  CommandResult out;
  out.report = base_report(run, "histograms");
  out.report["bins"] = config.bins;
  out.report["files"] = {"hist_y_train.csv", "hist_yhat_train.csv", "hist_y_test.csv",
                         "hist_yhat_test.csv"};
  std::vector<MethodResult> methods;
  methods.push_back(std::move(fair));
  out.report["methods"] = methods_json(methods);
  write_json(dir / "report.json", out.report);
  out.methods = std::move(methods);
  return out;
}

CommandResult cmd_check(const ExperimentConfig& config) {
  const PreparedRun run = prepare(config);
  const auto dir = ensure_out_dir(config);
  const Vector& y = run.data.train.y;
  const bool vacuous = run.full.k <= 1;

  json checks = json::array();
  bool all_ok = true;
  auto record = [&](const std::string& name, const std::string& status, const std::string& detail) {
    if (status == "fail") all_ok = false;
    checks.push_back({{"check", name}, {"status", status}, {"detail", detail}});
  };
  auto verdict = [](bool ok) { return std::string(ok ? "pass" : "fail"); };

  record("assumption1_rank", verdict(run.assumption.satisfied),
         "centered rank " + std::to_string(run.assumption.centered_rank) + ", k - 1 = " +
             std::to_string(run.assumption.k - 1));

  const double n_k = run.k_train.norm();
  if (vacuous) {
    record("projector_idempotence", "skipped", "single group");
    record("fair_train_mean_parity", "skipped", "single group");
    record("mse_bound", "skipped", "single group");
  } else {
    const Matrix& p = run.projection.p;
    const Matrix kp = run.k_train * p;
    const double idem = (kp * p - kp).norm();
    record("projector_idempotence", verdict(idem <= 1e-8 * n_k),
           "||K(P^2 - P)|| / ||K|| = " + format_double(idem / n_k));

    const Vector w_fair = fit_fair(run.spectrum, y, run.lambda, run.basis, config.rtol);
    const Vector pred = run.k_train * w_fair;
    const double scale = std::max(pred.cwiseAbs().maxCoeff(), 1e-300);
    const double resid = smd(pred, run.train_codes);
    record("fair_train_mean_parity", verdict(resid <= 1e-8 * scale),
           "train smd = " + format_double(resid));

    const Vector w_star0 = fit_unconstrained(run.spectrum, y, 0.0, config.rtol);
    const Vector w_fair0 = fit_fair(run.spectrum, y, 0.0, run.basis, config.rtol);
    const MseBoundTerms b = mse_bound_terms(run.k_train, y, w_star0, w_fair0, run.projection);
    const double slack = b.unconstrained_mse + b.violation_term - b.fair_mse;
    const double tol = 1e-8 * std::max({b.unconstrained_mse, y.squaredNorm() / y.size(), 1e-300});
    record("mse_bound", verdict(slack >= -tol),
           "fair " + format_double(b.fair_mse) + " <= " + format_double(b.unconstrained_mse) + " + " +
               format_double(b.violation_term));
  }

  // MPD <= DPD on every fitted prediction vector.
  const Vector w_star = fit_unconstrained(run.spectrum, y, run.lambda, config.rtol);
  const Vector w_fair = fit_fair(run.spectrum, y, run.lambda, run.basis, config.rtol);
  for (const auto& [name, w] : {std::pair{"unconstrained", &w_star}, std::pair{"fair", &w_fair}}) {
    MethodResult r = evaluate_weights(run, name, name, 0.0, *w);
    for (const auto* m : {&*r.train, r.test ? &*r.test : nullptr}) {
      if (m == nullptr) continue;
      const std::string split = m->split == Split::Train ? "train" : "test";
      const double gap = *m->dpd - m->mpd;
      record(std::string("mpd_le_dpd_") + name + "_" + split, verdict(gap >= -1e-12),
             "dpd - mpd = " + format_double(gap));
    }
  }

  std::cout << "check                              status   detail\n";
  for (const auto& c : checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-34s %-8s %s\n", c["check"].get<std::string>().c_str(),
                  c["status"].get<std::string>().c_str(), c["detail"].get<std::string>().c_str());
    std::cout << line;
  }

  CommandResult out;
  out.report = base_report(run, "check");
  out.report["checks"] = checks;
  out.report["passed"] = all_ok;
  write_json(dir / "check.json", out.report);
  out.exit_code = all_ok ? kExitOk : kExitInvariantFailure;
  return out;
}

CommandResult cmd_gen_synthetic(const ExperimentConfig& config) {
  const auto* s = std::get_if<SyntheticConfig>(&config.data);
  if (s == nullptr) throw ConfigError("gen-synthetic needs a synthetic data section");
  DataSet ds = gen_synthetic(*s, derive_seed(config.seed, "data"));
  const auto dir = ensure_out_dir(config);
  write_csv(ds, (dir / "synthetic.csv").string());
  CommandResult out;
  out.report = {{"command", "gen-synthetic"},
                {"version", kVersion},
                {"config", config.source},
                {"seeds", {{"master", config.seed}, {"data", derive_seed(config.seed, "data")}}},
                {"rows", ds.size()},
                {"k", ds.k},
                {"file", "synthetic.csv"}};
  write_json(dir / "report.json", out.report);
  return out;
}

}  // namespace mpfair
