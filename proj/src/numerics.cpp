#include "mpfair/numerics.hpp"

#include "mpfair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mpfair {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entry");
  }
}

Matrix centering_matrix(std::size_t n) {
  if (n == 0) throw DimensionError("centering_matrix: n must be at least 1");
  const auto size = static_cast<Eigen::Index>(n);
  Matrix h = Matrix::Constant(size, size, -1.0 / static_cast<double>(n));
  h.diagonal().array() += 1.0;
  return h;
}

Matrix center_gram(const Eigen::Ref<const Matrix>& k) {
  if (k.rows() != k.cols() || k.rows() == 0) {
    throw DimensionError("center_gram: expected a non-empty square matrix");
  }
  // H K H = K - r 1^T - 1 r^T + t 11^T with row means r and total mean t.
  const Vector col_means = k.colwise().mean().transpose();
  const Vector row_means = k.rowwise().mean();
  const double total = col_means.mean();
  Matrix out = k;
  out.rowwise() -= col_means.transpose();
  out.colwise() -= row_means;
  out.array() += total;
  return 0.5 * (out + out.transpose());
}

EigenResult sym_eig(const Eigen::Ref<const Matrix>& m, double sym_rtol) {
  if (m.rows() != m.cols()) throw DimensionError("sym_eig: matrix is not square");
  require_finite(m, "sym_eig");
  const double scale = m.cwiseAbs().maxCoeff();
  if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > sym_rtol * std::max(scale, 1e-300)) {
    throw SymmetryError("sym_eig: matrix is not symmetric within tolerance");
  }
  EigenResult out;
  if (m.rows() == 0) return out;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eig: eigensolver failed");
  // Eigen returns ascending order.
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Matrix pinv(const Eigen::Ref<const Matrix>& m, double rtol) {
  if (rtol <= 0.0) throw RangeError("pinv: rtol must be positive");
  require_finite(m, "pinv");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());

  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = rtol * sigma(0);
  Vector inv = Vector::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pinv_sym(const Eigen::Ref<const Matrix>& m, double rtol) {
  if (rtol <= 0.0) throw RangeError("pinv_sym: rtol must be positive");
  const EigenResult eig = sym_eig(m);
  if (eig.values.size() == 0) return Matrix(0, 0);
  const double cutoff = rtol * eig.values.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (std::abs(eig.values(i)) > cutoff) kept.push_back(i);
  }
  Matrix v(m.rows(), static_cast<Eigen::Index>(kept.size()));
  Vector inv(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    v.col(static_cast<Eigen::Index>(j)) = eig.vectors.col(kept[j]);
    inv(static_cast<Eigen::Index>(j)) = 1.0 / eig.values(kept[j]);
  }
  Matrix out = v * inv.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

std::size_t numerical_rank(const Eigen::Ref<const Vector>& values_desc, double rtol) {
  if (values_desc.size() == 0) return 0;
  const double top = std::max(values_desc.maxCoeff(), 0.0);
  if (top == 0.0) return 0;
  const double cutoff = rtol * top;
  return static_cast<std::size_t>((values_desc.array() > cutoff).count());
}

}  // namespace mpfair
