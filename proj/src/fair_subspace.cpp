#include "mpfair/fair_subspace.hpp"

#include "mpfair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mpfair {

namespace {

void require_square(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
}

Matrix columns(const Matrix& src, Eigen::Index count) { return src.leftCols(count); }

}  // namespace

std::size_t group_count(std::span<const int> group_codes) {
  int top = -1;
  for (int c : group_codes) {
    if (c < 0) throw RangeError("negative group code");
    top = std::max(top, c);
  }
  return static_cast<std::size_t>(top + 1);
}

Assumption1Check check_assumption1(const Eigen::Ref<const Matrix>& k_s,
                                   std::span<const int> group_codes, double rtol) {
  require_square(k_s, "check_assumption1");
  if (static_cast<std::size_t>(k_s.rows()) != group_codes.size()) {
    throw DimensionError("check_assumption1: K_S size does not match group codes");
  }
  return check_assumption1(centered_sensitive_spectrum(k_s), group_codes, rtol);
}

EigenResult centered_sensitive_spectrum(const Eigen::Ref<const Matrix>& k_s) {
  require_square(k_s, "centered_sensitive_spectrum");
  return sym_eig(center_gram(k_s));
}

Assumption1Check check_assumption1(const EigenResult& centered_k_s,
                                   std::span<const int> group_codes, double rtol) {
  if (static_cast<std::size_t>(centered_k_s.values.size()) != group_codes.size()) {
    throw DimensionError("check_assumption1: K_S size does not match group codes");
  }
  const std::size_t k = group_count(group_codes);
  std::vector<std::size_t> counts(k, 0);
  for (int c : group_codes) ++counts[static_cast<std::size_t>(c)];
  for (std::size_t g = 0; g < k; ++g) {
    if (counts[g] == 0) {
      throw MissingGroupError("check_assumption1: group " + std::to_string(g) +
                              " has no training samples");
    }
  }

  Assumption1Check out;
  out.k = k;
  out.centered_rank = numerical_rank(centered_k_s.values, rtol);
  out.satisfied = out.centered_rank + 1 == k;
  return out;
}

FairBasis build_fair_basis(const Eigen::Ref<const Matrix>& k_xs,
                           const Eigen::Ref<const Matrix>& k_s, double rtol) {
  require_square(k_xs, "build_fair_basis");
  require_square(k_s, "build_fair_basis");
  if (k_xs.rows() != k_s.rows()) {
    throw DimensionError("build_fair_basis: K_XS and K_S sizes differ");
  }
  if (k_xs.rows() < 2) return build_fair_basis(k_xs, k_s, EigenResult{}, rtol);
  return build_fair_basis(k_xs, k_s, centered_sensitive_spectrum(k_s), rtol);
}

FairBasis build_fair_basis(const Eigen::Ref<const Matrix>& k_xs,
                           const Eigen::Ref<const Matrix>& k_s, const EigenResult& centered_k_s,
                           double rtol) {
  require_square(k_xs, "build_fair_basis");
  require_square(k_s, "build_fair_basis");
  const Eigen::Index n = k_xs.rows();
  if (k_s.rows() != n || (n >= 2 && centered_k_s.values.size() != n)) {
    throw DimensionError("build_fair_basis: K_XS, K_S and spectrum sizes differ");
  }
  FairBasis basis;
  basis.n = static_cast<std::size_t>(n);
  basis.coeffs = Matrix(n, 0);
  basis.eigenvalues = Vector(0);
  if (n < 2) return basis;

  // The range of the empirical cross-covariance operator is
  // { Phi_XS c : c in col(H K_S H) }. Take an orthonormal basis of that
  // column space as candidate coefficients.
  const EigenResult& s_eig = centered_k_s;
  const auto s_rank = static_cast<Eigen::Index>(numerical_rank(s_eig.values, rtol));
  if (s_rank == 0) return basis;
  Matrix cand = columns(s_eig.vectors, s_rank);
  cand.rowwise() -= cand.colwise().mean();  // keep columns exactly in range(H)

  // Orthonormalise in the K_XS metric; directions K_XS cannot see are dropped.
  const Matrix k_cand = k_xs * cand;
  Matrix metric = cand.transpose() * k_cand;
  metric = 0.5 * (metric + metric.transpose());
  // Candidates are Euclidean-orthonormal, so the metric's spectrum is bounded
  // by that of K_XS; measure it against ||K_XS|| rather than against itself.
  const EigenResult m_eig = sym_eig(metric);
  const double cutoff = rtol * k_xs.norm();
  const auto m = static_cast<Eigen::Index>((m_eig.values.array() > cutoff).count());
  if (m == 0) return basis;
  const Vector inv_sqrt = m_eig.values.head(m).cwiseSqrt().cwiseInverse();
  Matrix coeffs = cand * columns(m_eig.vectors, m) * inv_sqrt.asDiagonal();

  // Rotate inside the span so the columns are eigenfunctions of
  // Sigma_(XS)S Sigma_S(XS); in this K-orthonormal basis its matrix is
  // (1/n^2) A^T K (H K_S H) K A.
  const Matrix ka = k_xs * coeffs;
  Matrix ka_centered = ka;
  ka_centered.rowwise() -= ka.colwise().mean();
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  Matrix op = ka_centered.transpose() * k_s * ka_centered / n2;
  op = 0.5 * (op + op.transpose());
  const EigenResult op_eig = sym_eig(op);

  basis.coeffs = coeffs * op_eig.vectors;
  basis.eigenvalues = op_eig.values;
  basis.m = static_cast<std::size_t>(m);
  return basis;
}

ProjectionMatrix projection_matrix(const FairBasis& basis, const Eigen::Ref<const Matrix>& k_xs) {
  require_square(k_xs, "projection_matrix");
  const Eigen::Index n = k_xs.rows();
  if (basis.coeffs.rows() != n || static_cast<std::size_t>(n) != basis.n) {
    throw DimensionError("projection_matrix: basis was built for a different sample size");
  }
  if (basis.m >= basis.n && basis.m > 0) {
    throw RangeError("projection_matrix: fair basis must have fewer than n directions");
  }
  ProjectionMatrix out;
  out.removed = basis.m;
  out.p = Matrix::Identity(n, n);
  if (basis.m > 0) out.p.noalias() -= basis.coeffs * (k_xs * basis.coeffs).transpose();
  return out;
}

double fair_group_mean_residual(const Eigen::Ref<const Matrix>& k_xs, const ProjectionMatrix& p,
                                const Eigen::Ref<const Vector>& c,
                                std::span<const int> group_codes) {
  if (k_xs.cols() != p.p.rows() || p.p.cols() != c.size() ||
      static_cast<std::size_t>(k_xs.rows()) != group_codes.size()) {
    throw DimensionError("fair_group_mean_residual: dimension mismatch");
  }
  const std::size_t k = group_count(group_codes);
  if (k <= 1) return 0.0;
  const Vector f = k_xs * (p.p * c);
  std::vector<double> sums(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < group_codes.size(); ++i) {
    const auto g = static_cast<std::size_t>(group_codes[i]);
    sums[g] += f(static_cast<Eigen::Index>(i));
    ++counts[g];
  }
  const double global = f.size() > 0 ? f.mean() : 0.0;
  double worst = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    if (counts[g] == 0) continue;
    worst = std::max(worst, std::abs(sums[g] / static_cast<double>(counts[g]) - global));
  }
  return worst;
}

}  // namespace mpfair
