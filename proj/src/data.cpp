#include "mpfair/data.hpp"

#include "mpfair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace mpfair {

namespace {

constexpr int kMaxRetries = 100;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size() && std::isfinite(out);
}

std::vector<int> all_groups_missing(const std::vector<int>& codes, std::size_t k) {
  std::vector<bool> seen(k, false);
  for (int c : codes) seen[static_cast<std::size_t>(c)] = true;
  std::vector<int> missing;
  for (std::size_t g = 0; g < k; ++g) {
    if (!seen[g]) missing.push_back(static_cast<int>(g));
  }
  return missing;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit bounded draw; std::shuffle's exact
  // sequence is implementation defined.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

std::string join_groups(const std::vector<int>& groups) {
  std::string out;
  for (int g : groups) out += (out.empty() ? "" : ",") + std::to_string(g);
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

std::vector<int> DataSet::group_codes() const {
  std::vector<int> codes(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) codes[i] = rows[i].s_code;
  return codes;
}

std::vector<int> DataSet::missing_groups() const { return all_groups_missing(group_codes(), k); }

DataSet DataSet::take(const std::vector<std::size_t>& indices) const {
  DataSet out;
  out.k = k;
  out.feature_names = feature_names;
  out.sensitive_names = sensitive_names;
  out.provenance = provenance;
  out.rows.reserve(indices.size());
  out.y.resize(static_cast<Eigen::Index>(indices.size()));
  out.s_raw.resize(static_cast<Eigen::Index>(indices.size()), s_raw.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(indices[i]);
    out.rows.push_back(rows.at(indices[i]));
    out.y(static_cast<Eigen::Index>(i)) = y(src);
    if (s_raw.cols() > 0) out.s_raw.row(static_cast<Eigen::Index>(i)) = s_raw.row(src);
  }
  return out;
}

DataSet gen_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 2 || cfg.d < 1 || cfg.e < 1) {
    throw RangeError("gen_synthetic: need n >= 2, d >= 1, e >= 1");
  }
  if (cfg.e > 20) throw RangeError("gen_synthetic: e larger than 20 is not supported");
  if (!(cfg.noise_sd >= 0.0)) throw RangeError("gen_synthetic: noise_sd must be >= 0");
  const std::size_t k = std::size_t{1} << cfg.e;
  if (cfg.n < k) throw RangeError("gen_synthetic: n is smaller than the number of groups 2^e");

  const auto d = static_cast<Eigen::Index>(cfg.d);
  const auto e = static_cast<Eigen::Index>(cfg.e);
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, "gen_synthetic/" + std::to_string(attempt)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    Vector w(d + e);
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = normal(rng);

    DataSet ds;
    ds.k = k;
    ds.rows.resize(cfg.n);
    ds.y.resize(static_cast<Eigen::Index>(cfg.n));
    ds.s_raw.resize(static_cast<Eigen::Index>(cfg.n), e);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      SampleRow& row = ds.rows[i];
      row.x.resize(cfg.d);
      double lin = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        row.x[static_cast<std::size_t>(j)] = normal(rng);
        lin += row.x[static_cast<std::size_t>(j)] * w(j);
      }
      int code = 0;
      for (Eigen::Index j = 0; j < e; ++j) {
        const bool positive = coin(rng);
        const double s = positive ? 0.1 : -0.1;
        ds.s_raw(ii, j) = s;
        lin += s * w(d + j);
        if (positive) code |= 1 << j;
      }
      row.s_code = code;
      row.s_value = cfg.e == 1 ? ds.s_raw(ii, 0) : static_cast<double>(code);
      const double noise = cfg.noise_sd > 0.0 ? cfg.noise_sd * normal(rng) : 0.0;
      ds.y(ii) = (cfg.link == Link::Linear ? lin : std::sin(lin)) + noise;
    }
    if (!ds.missing_groups().empty()) continue;

    for (std::size_t j = 0; j < cfg.d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t j = 0; j < cfg.e; ++j) ds.sensitive_names.push_back("s" + std::to_string(j));
    ds.provenance = SyntheticSource{cfg, seed, attempt + 1};
    return ds;
  }
  throw SplitError("gen_synthetic: could not cover every sensitive group");
}

DataSet load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV file '" + path + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_line(line);

  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("CSV is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  if (schema.target_column.empty()) throw SchemaError("schema: target column is required");
  const std::size_t target = column(schema.target_column);
  std::vector<std::size_t> sensitive;
  for (const auto& name : schema.sensitive_columns) {
    if (name == schema.target_column) throw SchemaError("schema: target is also listed as sensitive");
    sensitive.push_back(column(name));
  }
  for (const auto& name : schema.feature_columns) {
    if (name == schema.target_column) throw SchemaError("schema: target is also listed as a feature");
  }
  if (sensitive.size() > 20) throw SchemaError("schema: at most 20 sensitive columns");
  for (const auto& [name, threshold] : schema.binarize) {
    if (std::find(schema.sensitive_columns.begin(), schema.sensitive_columns.end(), name) ==
        schema.sensitive_columns.end()) {
      throw SchemaError("schema: binarize rule for non-sensitive column '" + name + "'");
    }
  }

  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    records.push_back(split_line(line));
    line_numbers.push_back(line_no);
  }

  std::vector<std::size_t> features;
  std::vector<std::string> feature_names;
  if (!schema.feature_columns.empty()) {
    for (const auto& name : schema.feature_columns) {
      if (std::find(schema.sensitive_columns.begin(), schema.sensitive_columns.end(), name) !=
          schema.sensitive_columns.end()) {
        throw SchemaError("schema: column '" + name + "' is both feature and sensitive");
      }
      features.push_back(column(name));
      feature_names.push_back(name);
    }
  } else {
    const std::set<std::size_t> reserved(sensitive.begin(), sensitive.end());
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target || reserved.count(c) != 0) continue;
      const bool numeric = std::all_of(records.begin(), records.end(), [&](const auto& r) {
        double v;
        return c < r.size() && parse_number(r[c], v);
      });
      if (numeric) {
        features.push_back(c);
        feature_names.push_back(header[c]);
      }
    }
  }

  DataSet ds;
  ds.k = std::size_t{1} << sensitive.size();
  ds.feature_names = feature_names;
  ds.sensitive_names = schema.sensitive_columns;
  CsvSource source{path, schema, {}};
  std::vector<double> ys;
  std::vector<std::vector<double>> raws;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto read = [&](std::size_t c, double& v) { return c < rec.size() && parse_number(rec[c], v); };
    SampleRow row;
    double yv = 0.0;
    bool ok = read(target, yv);
    row.x.resize(features.size());
    for (std::size_t j = 0; ok && j < features.size(); ++j) ok = read(features[j], row.x[j]);
    std::vector<double> raw(sensitive.size());
    for (std::size_t j = 0; ok && j < sensitive.size(); ++j) ok = read(sensitive[j], raw[j]);
    if (!ok) {
      source.rejected_rows.push_back(line_numbers[r]);
      continue;
    }
    int code = 0;
    for (std::size_t j = 0; j < sensitive.size(); ++j) {
      const auto rule = schema.binarize.find(schema.sensitive_columns[j]);
      bool bit;
      if (rule != schema.binarize.end()) {
        bit = raw[j] > rule->second;
      } else if (raw[j] == 0.0 || raw[j] == 1.0) {
        bit = raw[j] == 1.0;
      } else {
        throw SchemaError("sensitive column '" + schema.sensitive_columns[j] + "' has value " +
                          rec[sensitive[j]] + " on line " + std::to_string(line_numbers[r]) +
                          "; expected 0/1 or a binarize threshold");
      }
      if (bit) code |= 1 << j;
    }
    row.s_code = code;
    row.s_value = static_cast<double>(code);
    ds.rows.push_back(std::move(row));
    ys.push_back(yv);
    raws.push_back(std::move(raw));
  }
  if (ds.rows.empty()) throw SchemaError("CSV file '" + path + "' has no usable rows");

  ds.y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  ds.s_raw.resize(static_cast<Eigen::Index>(raws.size()), static_cast<Eigen::Index>(sensitive.size()));
  for (std::size_t i = 0; i < raws.size(); ++i) {
    for (std::size_t j = 0; j < sensitive.size(); ++j) {
      ds.s_raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = raws[i][j];
    }
  }
  ds.provenance = std::move(source);
  const auto missing = ds.missing_groups();
  if (!missing.empty()) {
    throw MissingGroupError("CSV '" + path + "': sensitive groups with no rows: " +
                            join_groups(missing));
  }
  return ds;
}

void write_csv(const DataSet& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  std::vector<std::string> cols = ds.feature_names;
  cols.insert(cols.end(), ds.sensitive_names.begin(), ds.sensitive_names.end());
  cols.push_back("s_code");
  cols.push_back("y");
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (double v : ds.rows[i].x) {
      put(v);
      out << ',';
    }
    for (Eigen::Index j = 0; j < ds.s_raw.cols(); ++j) {
      put(ds.s_raw(ii, j));
      out << ',';
    }
    out << ds.rows[i].s_code << ',';
    put(ds.y(ii));
    out << '\n';
  }
}

SplitResult split(const DataSet& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw RangeError("split: train fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  if (n < 2) throw RangeError("split: need at least two rows");
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    const auto idx = shuffled_indices(n, derive_seed(seed, "split/" + std::to_string(attempt)));
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> test_idx(idx.begin() + static_cast<long>(n_train), idx.end());
    SplitResult out;
    out.train = ds.take(train_idx);
    if (!out.train.missing_groups().empty()) continue;
    out.test = ds.take(test_idx);
    out.test_missing_groups = out.test.missing_groups();
    out.retries = attempt;
    return out;
  }
  throw SplitError("split: no shuffle put every group in the training split after " +
                   std::to_string(kMaxRetries) + " retries");
}

Centered center_targets(const DataSet& train, const DataSet& test) {
  if (train.size() == 0) throw RangeError("center_targets: empty training set");
  Centered out{train, test, train.y.mean()};
  out.train.y.array() -= out.mean;
  out.test.y.array() -= out.mean;
  return out;
}

DataSet subsample(const DataSet& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw RangeError("subsample: requested " + std::to_string(n) + " rows from " +
                     std::to_string(ds.size()));
  }
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    auto idx = shuffled_indices(ds.size(), derive_seed(seed, "subsample/" + std::to_string(attempt)));
    idx.resize(n);
    DataSet out = ds.take(idx);
    if (out.missing_groups().empty()) return out;
  }
  throw SplitError("subsample: could not cover every group after " + std::to_string(kMaxRetries) +
                   " retries");
}

}  // namespace mpfair
