#pragma once

#include "mpfair/numerics.hpp"

#include <cstddef>
#include <span>

namespace mpfair {

struct Assumption1Check {
  bool satisfied = false;
  std::size_t centered_rank = 0;
  std::size_t k = 0;
};

/// K_XS-orthonormal coefficient vectors spanning the range of the empirical
/// cross-covariance operator from the sensitive RKHS into the joint RKHS.
/// Column j holds a_j, so the basis function is theta_j = Phi_XS a_j.
struct FairBasis {
  Matrix coeffs;       // n x m
  Vector eigenvalues;  // m, descending
  std::size_t m = 0;
  std::size_t n = 0;
};

/// Coefficient-space projection onto the mean-parity fair subspace:
/// P = I - A A^T K_XS with A = basis coefficients.
struct ProjectionMatrix {
  Matrix p;
  std::size_t removed = 0;  // m; zero means P is the identity
};

/// Centered rank of K_S against the number of groups. Every group in
/// 0..k-1 must be present, otherwise MissingGroupError.
Assumption1Check check_assumption1(const Eigen::Ref<const Matrix>& k_s,
                                   std::span<const int> group_codes,
                                   double rtol = kDefaultRtol);

FairBasis build_fair_basis(const Eigen::Ref<const Matrix>& k_xs,
                           const Eigen::Ref<const Matrix>& k_s,
                           double rtol = kDefaultRtol);

/// Eigendecomposition of H K_S H. The overloads below accept it so the rank
/// check and the basis construction can share one eigensolve.
EigenResult centered_sensitive_spectrum(const Eigen::Ref<const Matrix>& k_s);

Assumption1Check check_assumption1(const EigenResult& centered_k_s,
                                   std::span<const int> group_codes,
                                   double rtol = kDefaultRtol);

FairBasis build_fair_basis(const Eigen::Ref<const Matrix>& k_xs,
                           const Eigen::Ref<const Matrix>& k_s, const EigenResult& centered_k_s,
                           double rtol = kDefaultRtol);

ProjectionMatrix projection_matrix(const FairBasis& basis, const Eigen::Ref<const Matrix>& k_xs);

/// max_j |mean over group j of (K P c) - mean of (K P c)|.
double fair_group_mean_residual(const Eigen::Ref<const Matrix>& k_xs, const ProjectionMatrix& p,
                                const Eigen::Ref<const Vector>& c,
                                std::span<const int> group_codes);

/// Largest group code + 1.
std::size_t group_count(std::span<const int> group_codes);

}  // namespace mpfair
