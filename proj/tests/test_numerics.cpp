#include "doctest.h"

#include "mpfair/errors.hpp"
#include "mpfair/numerics.hpp"
#include "test_support.hpp"

using namespace mpfair;

TEST_CASE("centering_matrix") {
  CHECK(centering_matrix(1)(0, 0) == 0.0);

  const Matrix h2 = centering_matrix(2);
  Matrix expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  CHECK((h2 - expected).cwiseAbs().maxCoeff() == 0.0);

  const Matrix h3 = centering_matrix(3);
  CHECK((h3 * Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-15);

  for (std::size_t n : {1u, 4u, 17u}) {
    const Matrix h = centering_matrix(n);
    CHECK((h * h - h).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(centering_matrix(0), DimensionError);
}

TEST_CASE("center_gram") {
  CHECK(center_gram(Matrix::Ones(3, 3)).cwiseAbs().maxCoeff() < 1e-15);

  Matrix expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  CHECK((center_gram(Matrix::Identity(2, 2)) - expected).cwiseAbs().maxCoeff() < 1e-15);

  std::mt19937_64 rng(7);
  const Matrix a = testing::random_matrix(5, 5, rng);
  const Matrix k = a + a.transpose();
  const Matrix c = center_gram(k);
  // Oracle: explicit H K H.
  const Matrix h = centering_matrix(5);
  CHECK((c - h * k * h).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(center_gram(Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("center_gram keeps PSD inputs PSD") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = testing::random_matrix(8, 3, rng);
    const Matrix k = a * a.transpose();
    const Vector values = sym_eig(center_gram(k)).values;
    CHECK(values.minCoeff() >= -1e-10 * k.norm());
  }
}

TEST_CASE("sym_eig") {
  Matrix d = Vector(Eigen::Vector3d(3, 1, 2)).asDiagonal();
  const EigenResult r = sym_eig(d);
  CHECK(r.values(0) == doctest::Approx(3));
  CHECK(r.values(1) == doctest::Approx(2));
  CHECK(r.values(2) == doctest::Approx(1));

  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  const EigenResult s = sym_eig(swap);
  CHECK(s.values(0) == doctest::Approx(1));
  CHECK(s.values(1) == doctest::Approx(-1));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(s.vectors(0, 0)) == doctest::Approx(inv_sqrt2));
  CHECK(s.vectors(0, 0) * s.vectors(1, 0) > 0);  // (1, 1) direction
  CHECK(s.vectors(0, 1) * s.vectors(1, 1) < 0);  // (1, -1) direction

  std::mt19937_64 rng(3);
  const Matrix a = testing::random_matrix(6, 6, rng);
  const Matrix psd = a.transpose() * a;
  const EigenResult e = sym_eig(psd);
  CHECK(e.values.minCoeff() >= -1e-10);
  for (Eigen::Index i = 1; i < e.values.size(); ++i) CHECK(e.values(i - 1) >= e.values(i));
  const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  CHECK((recon - psd).norm() <= 1e-8 * psd.norm());
  CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK((psd * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).norm() <= 1e-8 * psd.norm());
  }

  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(sym_eig(asym), SymmetryError);
}

TEST_CASE("pinv") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  const Matrix pd = pinv(d);
  CHECK(pd(0, 0) == doctest::Approx(0.5));
  CHECK(pd(1, 1) == 0.0);
  CHECK((pinv(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix m = testing::random_matrix(5, 3, rng);
    const Matrix mp = pinv(m);
    const double scale = m.norm();
    CHECK((m * mp * m - m).norm() <= 1e-8 * scale);
    CHECK((mp * m * mp - mp).norm() <= 1e-8 * mp.norm());
    CHECK(((m * mp).transpose() - m * mp).norm() <= 1e-8);
    CHECK(((mp * m).transpose() - mp * m).norm() <= 1e-8);
    CHECK((pinv(mp) - m).norm() <= 1e-8 * scale);
  }

  // Rank-deficient symmetric input: pinv_sym agrees with the SVD route.
  const Matrix a = testing::random_matrix(6, 2, rng);
  const Matrix low = a * a.transpose();
  CHECK((pinv_sym(low) - pinv(low)).norm() <= 1e-8 * pinv(low).norm());
  CHECK((low * pinv_sym(low) * low - low).norm() <= 1e-8 * low.norm());
  CHECK_THROWS_AS(pinv(low, 0.0), RangeError);
}

TEST_CASE("numerical_rank") {
  CHECK(numerical_rank(Vector(Eigen::Vector3d(3, 2, 1e-15)), 1e-10) == 2);
  CHECK(numerical_rank(Vector::Zero(2), 1e-3) == 0);
  CHECK(numerical_rank(Vector(Eigen::Vector2d(-1, -2)), 1e-10) == 0);

  // Centered delta-kernel Gram over 3 groups has rank 2.
  const std::vector<int> codes = {0, 1, 2, 0, 1, 2, 2};
  Matrix k(7, 7);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) k(i, j) = codes[i] == codes[j] ? 1.0 : 0.0;
  CHECK(numerical_rank(sym_eig(center_gram(k)).values, 1e-10) == 2);
}

TEST_CASE("require_finite rejects NaN") {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = std::nan("");
  CHECK_THROWS_AS(require_finite(m, "test"), NumericError);
  CHECK_THROWS_AS(pinv(m), NumericError);
}
