#include "mpfair/metrics.hpp"

#include "mpfair/errors.hpp"
#include "mpfair/fair_subspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mpfair {

namespace {

void check_codes(const Eigen::Ref<const Vector>& pred, std::span<const int> codes) {
  if (static_cast<std::size_t>(pred.size()) != codes.size()) {
    throw DimensionError("metrics: predictions and group codes differ in length");
  }
  if (codes.empty()) throw DimensionError("metrics: no samples");
}

struct GroupStats {
  std::vector<double> sums;
  std::vector<std::size_t> counts;
};

GroupStats accumulate(const Eigen::Ref<const Vector>& pred, std::span<const int> codes,
                      std::size_t k) {
  GroupStats s{std::vector<double>(k, 0.0), std::vector<std::size_t>(k, 0)};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || static_cast<std::size_t>(codes[i]) >= k) {
      throw RangeError("metrics: group code " + std::to_string(codes[i]) + " out of range");
    }
    const auto g = static_cast<std::size_t>(codes[i]);
    s.sums[g] += pred(static_cast<Eigen::Index>(i));
    ++s.counts[g];
  }
  return s;
}

std::vector<double> group_values(const Eigen::Ref<const Vector>& pred, std::span<const int> codes,
                                 int group) {
  std::vector<double> out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == group) out.push_back(pred(static_cast<Eigen::Index>(i)));
  }
  return out;
}

}  // namespace

double mse(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Vector>& y) {
  if (pred.size() != y.size()) throw DimensionError("mse: length mismatch");
  if (pred.size() == 0) throw DimensionError("mse: empty input");
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

std::vector<double> group_means(const Eigen::Ref<const Vector>& pred,
                                std::span<const int> group_codes, std::size_t k) {
  check_codes(pred, group_codes);
  const GroupStats s = accumulate(pred, group_codes, k);
  std::vector<double> means(k);
  for (std::size_t g = 0; g < k; ++g) {
    if (s.counts[g] == 0) {
      throw MissingGroupError("group " + std::to_string(g) + " has no samples");
    }
    means[g] = s.sums[g] / static_cast<double>(s.counts[g]);
  }
  return means;
}

double smd(const Eigen::Ref<const Vector>& pred, std::span<const int> group_codes) {
  check_codes(pred, group_codes);
  const double global = pred.mean();
  double total = 0.0;
  for (double m : group_means(pred, group_codes, group_count(group_codes))) {
    total += std::abs(m - global);
  }
  return total;
}

double w1_empirical(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DimensionError("w1_empirical: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  // Integrate |F_a - F_b| between consecutive points of the merged support.
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t ia = 0;
  std::size_t ib = 0;
  double total = 0.0;
  double prev = std::min(sa.front(), sb.front());
  while (ia < sa.size() || ib < sb.size()) {
    double next;
    if (ib == sb.size() || (ia < sa.size() && sa[ia] <= sb[ib])) {
      next = sa[ia];
    } else {
      next = sb[ib];
    }
    total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (next - prev);
    while (ia < sa.size() && sa[ia] == next) ++ia;
    while (ib < sb.size() && sb[ib] == next) ++ib;
    prev = next;
  }
  return total;
}

double dpd(const Eigen::Ref<const Vector>& pred, std::span<const int> group_codes) {
  check_codes(pred, group_codes);
  const std::size_t k = group_count(group_codes);
  group_means(pred, group_codes, k);  // rejects empty groups
  const std::vector<double> all(pred.data(), pred.data() + pred.size());
  double total = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    total += w1_empirical(group_values(pred, group_codes, static_cast<int>(g)), all);
  }
  return total;
}

double cov_norm(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Matrix>& k_s) {
  if (k_s.rows() != k_s.cols() || k_s.rows() != pred.size()) {
    throw DimensionError("cov_norm: K_S and predictions disagree");
  }
  if (pred.size() == 0) return 0.0;
  const Vector centered = pred.array() - pred.mean();
  // centered is already in range(H), so p^T H K_S H p = p^T K_S p.
  const double quad = centered.dot(k_s * centered);
  const double scale = centered.squaredNorm() * std::max(k_s.cwiseAbs().maxCoeff(), 1.0);
  if (quad < -1e-10 * scale) throw NumericError("cov_norm: negative quadratic form");
  return std::sqrt(std::max(quad, 0.0)) / static_cast<double>(pred.size());
}

MetricReport evaluate(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Vector>& y,
                      std::span<const int> group_codes, std::size_t k, Split split,
                      const Matrix* k_s) {
  check_codes(pred, group_codes);
  MetricReport r;
  r.split = split;
  r.mse = mse(pred, y);

  const GroupStats s = accumulate(pred, group_codes, k);
  const double global = pred.mean();
  const std::vector<double> all(pred.data(), pred.data() + pred.size());
  double dpd_total = 0.0;
  r.per_group_means.resize(k);
  for (std::size_t g = 0; g < k; ++g) {
    if (s.counts[g] == 0) continue;
    const double m = s.sums[g] / static_cast<double>(s.counts[g]);
    r.per_group_means[g] = m;
    r.smd += std::abs(m - global);
    dpd_total += w1_empirical(group_values(pred, group_codes, static_cast<int>(g)), all);
  }
  r.mpd = r.smd;
  r.dpd = dpd_total;
  if (k_s != nullptr) r.cov_norm = cov_norm(pred, *k_s);
  return r;
}

}  // namespace mpfair
