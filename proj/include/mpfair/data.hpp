#pragma once

#include "mpfair/kernels.hpp"
#include "mpfair/numerics.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mpfair {

enum class Link { Linear, Sine };

struct SyntheticConfig {
  std::size_t n = 2000;
  std::size_t d = 5;
  std::size_t e = 1;
  double noise_sd = 0.31622776601683794;  // sqrt(0.1)
  Link link = Link::Linear;
};

struct CsvSchema {
  std::string target_column;
  std::vector<std::string> sensitive_columns;
  std::vector<std::string> feature_columns;  // empty: every remaining column
  std::map<std::string, double> binarize;    // column -> threshold (value > t is 1)
};

struct SyntheticSource {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::uint64_t attempts = 1;  // generations needed until every group was present
};

struct CsvSource {
  std::string path;
  CsvSchema schema;
  std::vector<std::size_t> rejected_rows;  // 1-based file line numbers (header is line 1)
};

using Provenance = std::variant<SyntheticSource, CsvSource>;

struct DataSet {
  std::vector<SampleRow> rows;
  Vector y;
  std::size_t k = 1;
  std::vector<std::string> feature_names;
  std::vector<std::string> sensitive_names;
  Matrix s_raw;  // n x r raw sensitive attribute values
  Provenance provenance = SyntheticSource{};

  std::size_t size() const { return rows.size(); }
  std::vector<int> group_codes() const;
  /// Groups in 0..k-1 with no rows.
  std::vector<int> missing_groups() const;
  DataSet take(const std::vector<std::size_t>& indices) const;
};

/// Deterministic per-operation seed from a master seed and a tag.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// x ~ N(0, I_d), w ~ N(0, I_{d+e}), s uniform on {0.1, -0.1}^e,
/// y = [x, s]^T w + eps (or sin of it). Group code bit j is set when
/// s_j = +0.1. For e = 1 the scalar s_value is the raw s; for e > 1 it is the
/// group code. Regenerates from a derived seed until all 2^e groups appear.
DataSet gen_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

DataSet load_csv(const std::string& path, const CsvSchema& schema);

/// Writes features, raw sensitive columns, group code and target.
void write_csv(const DataSet& ds, const std::string& path);

struct SplitResult {
  DataSet train;
  DataSet test;
  std::vector<int> test_missing_groups;
  int retries = 0;
};

SplitResult split(const DataSet& ds, double train_fraction, std::uint64_t seed);

struct Centered {
  DataSet train;
  DataSet test;
  double mean = 0.0;
};

Centered center_targets(const DataSet& train, const DataSet& test);

DataSet subsample(const DataSet& ds, std::size_t n, std::uint64_t seed);

}  // namespace mpfair
