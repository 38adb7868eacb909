#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace mpfair {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Default relative tolerance for rank decisions and pseudoinverse truncation.
inline constexpr double kDefaultRtol = 1e-10;

/// Eigenpairs of a symmetric matrix, values sorted descending and one
/// orthonormal eigenvector per column of `vectors`.
struct EigenResult {
  Vector values;
  Matrix vectors;
};

/// Throws NumericError if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

/// H = I - (1/n) 11^T.
Matrix centering_matrix(std::size_t n);

/// H K H for a square K. Computed without materialising H.
Matrix center_gram(const Eigen::Ref<const Matrix>& k);

/// Full symmetric eigendecomposition. Rejects inputs whose asymmetry exceeds
/// `sym_rtol` relative to the largest absolute entry.
EigenResult sym_eig(const Eigen::Ref<const Matrix>& m, double sym_rtol = kDefaultRtol);

/// Moore-Penrose pseudoinverse via SVD; singular values at or below
/// rtol * sigma_max are treated as zero.
Matrix pinv(const Eigen::Ref<const Matrix>& m, double rtol = kDefaultRtol);

/// Pseudoinverse of a symmetric matrix through its eigendecomposition.
/// Same truncation rule as pinv, applied to |eigenvalue|.
Matrix pinv_sym(const Eigen::Ref<const Matrix>& m, double rtol = kDefaultRtol);

/// Count of values strictly above rtol * max(values, 0).
std::size_t numerical_rank(const Eigen::Ref<const Vector>& values_desc,
                           double rtol = kDefaultRtol);

}  // namespace mpfair
