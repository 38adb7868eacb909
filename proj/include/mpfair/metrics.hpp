#pragma once

#include "mpfair/numerics.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mpfair {

enum class Split { Train, Test };

struct MetricReport {
  double mse = 0.0;
  double smd = 0.0;
  double mpd = 0.0;
  std::optional<double> dpd;
  std::optional<double> cov_norm;
  Split split = Split::Train;
  std::vector<std::optional<double>> per_group_means;  // empty for groups absent from the split
};

double mse(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Vector>& y);

/// Mean prediction of each group 0..k-1. Empty groups raise MissingGroupError.
std::vector<double> group_means(const Eigen::Ref<const Vector>& pred,
                                std::span<const int> group_codes, std::size_t k);

/// Sum over groups of |group mean - global mean|. This is also the empirical
/// mean-parity disparity.
double smd(const Eigen::Ref<const Vector>& pred, std::span<const int> group_codes);

inline double mpd(const Eigen::Ref<const Vector>& pred, std::span<const int> group_codes) {
  return smd(pred, group_codes);
}

/// 1-Wasserstein distance between two empirical distributions.
double w1_empirical(std::span<const double> a, std::span<const double> b);

/// Sum over groups of W1(pred | group, pred).
double dpd(const Eigen::Ref<const Vector>& pred, std::span<const int> group_codes);

/// (1/n) sqrt(p^T H K_S H p) with p the centered predictions.
double cov_norm(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Matrix>& k_s);

/// Metrics over groups 0..k-1. Groups with no samples in this split are
/// skipped by smd/dpd; a test split may legitimately miss a group.
MetricReport evaluate(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Vector>& y,
                      std::span<const int> group_codes, std::size_t k, Split split,
                      const Matrix* k_s = nullptr);

}  // namespace mpfair
