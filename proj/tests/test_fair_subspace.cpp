#include "doctest.h"

#include "mpfair/errors.hpp"
#include "mpfair/fair_subspace.hpp"
#include "mpfair/kernels.hpp"
#include "test_support.hpp"

using namespace mpfair;

namespace {

struct Instance {
  std::vector<SampleRow> rows;
  std::vector<int> codes;
  Matrix k_xs;
  Matrix k_s;
};

Instance make_instance(std::size_t n, std::size_t d, std::size_t k, std::mt19937_64& rng,
                       const KernelSpec& s_kernel = DeltaGroupKernel{},
                       const BaseKernel& x_kernel = LinearKernel{}) {
  Instance inst;
  inst.rows = testing::random_rows(n, d, k, rng);
  inst.codes = testing::codes_of(inst.rows);
  BaseKernel s_part;
  std::visit([&](const auto& v) {
    if constexpr (!std::is_same_v<std::decay_t<decltype(v)>, ComposedKernel>) s_part = v;
  }, s_kernel);
  inst.k_xs = gram(ComposedKernel{x_kernel, s_part, Composition::Sum}, inst.rows);
  inst.k_s = gram(s_kernel, inst.rows);
  return inst;
}

}  // namespace

TEST_CASE("check_assumption1 with delta kernel") {
  std::mt19937_64 rng(1);
  const auto inst = make_instance(20, 2, 3, rng);
  const auto r = check_assumption1(inst.k_s, inst.codes);
  CHECK(r.satisfied);
  CHECK(r.centered_rank == 2);
  CHECK(r.k == 3);
}

TEST_CASE("check_assumption1 with polynomial kernels") {
  std::mt19937_64 rng(2);
  auto rows = testing::random_rows(40, 1, 4, rng);
  const std::vector<double> values = {-1.3, 0.2, 0.9, 2.1};
  for (auto& r : rows) r.s_value = values[static_cast<std::size_t>(r.s_code)];
  const auto codes = testing::codes_of(rows);

  const auto cubic = check_assumption1(gram(PolynomialKernel{3, 1.0}, rows), codes);
  CHECK(cubic.satisfied);
  CHECK(cubic.centered_rank == 3);

  // Linear kappa_S over three distinct scalars only spans one centered direction.
  auto three = testing::random_rows(30, 1, 3, rng);
  for (auto& r : three) r.s_value = values[static_cast<std::size_t>(r.s_code)];
  const auto linear = check_assumption1(gram(PolynomialKernel{1, 0.0}, three), testing::codes_of(three));
  CHECK_FALSE(linear.satisfied);
  CHECK(linear.centered_rank == 1);
}

TEST_CASE("binary sensitive attribute with s*s' kernel satisfies the rank condition") {
  // For two distinct values s_a != s_b the centered features are nonzero.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto rows = testing::random_rows(15, 1, 2, rng);
    double a = unif(rng), b = unif(rng);
    if (std::abs(a - b) < 1e-3) b = a + 1.0;
    for (auto& r : rows) r.s_value = r.s_code == 0 ? a : b;
    const auto res = check_assumption1(gram(PolynomialKernel{1, 0.0}, rows), testing::codes_of(rows));
    CHECK(res.satisfied);
  }
}

TEST_CASE("check_assumption1 rejects missing groups") {
  const std::vector<int> codes = {0, 2, 2, 0};
  CHECK_THROWS_AS(check_assumption1(Matrix::Identity(4, 4), codes), MissingGroupError);
}

TEST_CASE("fair basis: single group yields an empty basis and P = I") {
  std::mt19937_64 rng(4);
  const auto inst = make_instance(10, 2, 1, rng);
  const FairBasis basis = build_fair_basis(inst.k_xs, inst.k_s);
  CHECK(basis.m == 0);
  CHECK(basis.coeffs.cols() == 0);
  const ProjectionMatrix p = projection_matrix(basis, inst.k_xs);
  CHECK((p.p - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fair basis invariants") {
  std::mt19937_64 rng(5);
  for (std::size_t k : {2u, 3u, 4u}) {
    const auto inst = make_instance(30, 3, k, rng);
    const FairBasis basis = build_fair_basis(inst.k_xs, inst.k_s);
    CHECK(basis.m == k - 1);
    const Matrix ortho = basis.coeffs.transpose() * inst.k_xs * basis.coeffs;
    CHECK((ortho - Matrix::Identity(static_cast<Eigen::Index>(basis.m), static_cast<Eigen::Index>(basis.m)))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
    CHECK(basis.coeffs.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(basis.eigenvalues.minCoeff() > 0.0);
    for (Eigen::Index i = 1; i < basis.eigenvalues.size(); ++i) {
      CHECK(basis.eigenvalues(i - 1) >= basis.eigenvalues(i));
    }
    CHECK(basis.m == check_assumption1(inst.k_s, inst.codes).centered_rank);

    const ProjectionMatrix p = projection_matrix(basis, inst.k_xs);
    const double kn = inst.k_xs.norm();
    CHECK((inst.k_xs * p.p * p.p - inst.k_xs * p.p).norm() <= 1e-8 * kn);
    CHECK((basis.coeffs.transpose() * inst.k_xs * p.p).cwiseAbs().maxCoeff() <= 1e-8 * kn);
    // P^T K P equals K P (K-self-adjoint projector).
    CHECK((p.p.transpose() * inst.k_xs * p.p - inst.k_xs * p.p).norm() <= 1e-8 * kn);
  }
}

TEST_CASE("fair basis eigenvalues match the coefficient eigenproblem") {
  std::mt19937_64 rng(6);
  const auto inst = make_instance(12, 2, 3, rng);
  const FairBasis basis = build_fair_basis(inst.k_xs, inst.k_s);
  const auto n = inst.k_xs.rows();
  const Matrix h = centering_matrix(static_cast<std::size_t>(n));
  const Matrix op = (h * inst.k_s * h) * (h * inst.k_xs * h) / static_cast<double>(n * n);
  Eigen::EigenSolver<Matrix> solver(op);
  std::vector<double> values;
  for (Eigen::Index i = 0; i < n; ++i) values.push_back(solver.eigenvalues()(i).real());
  std::sort(values.rbegin(), values.rend());
  REQUIRE(basis.m == 2);
  CHECK(basis.eigenvalues(0) == doctest::Approx(values[0]).epsilon(1e-8));
  CHECK(basis.eigenvalues(1) == doctest::Approx(values[1]).epsilon(1e-8));
}

TEST_CASE("span equivalence with the dense nonsymmetric eigensolve at n = 8") {
  std::mt19937_64 rng(7);
  const auto inst = make_instance(8, 2, 2, rng);
  const ProjectionMatrix p = projection_matrix(build_fair_basis(inst.k_xs, inst.k_s), inst.k_xs);
  const Matrix reference = testing::dense_eigen_projector(inst.k_xs, inst.k_s);
  CHECK((inst.k_xs * (p.p - reference)).norm() <= 1e-7 * inst.k_xs.norm());
}

TEST_CASE("projected functions have equal group means on training data") {
  std::mt19937_64 rng(8);
  const auto inst = make_instance(10, 2, 2, rng);
  const ProjectionMatrix p = projection_matrix(build_fair_basis(inst.k_xs, inst.k_s), inst.k_xs);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector c = testing::random_vector(10, rng);
    const Vector f = inst.k_xs * p.p * c;
    CHECK(testing::group_mean_spread(f, inst.codes, 2) <= 1e-8 * f.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("fair_group_mean_residual") {
  std::mt19937_64 rng(9);
  const auto inst = make_instance(24, 2, 3, rng);
  const ProjectionMatrix p = projection_matrix(build_fair_basis(inst.k_xs, inst.k_s), inst.k_xs);
  CHECK(fair_group_mean_residual(inst.k_xs, p, Vector::Zero(24), inst.codes) == 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector c = testing::random_vector(24, rng);
    const double scale = (inst.k_xs * p.p * c).cwiseAbs().maxCoeff();
    CHECK(fair_group_mean_residual(inst.k_xs, p, c, inst.codes) <= 1e-8 * scale);
  }
  // Without projection the spread is visible.
  const ProjectionMatrix identity{Matrix::Identity(24, 24), 0};
  CHECK(fair_group_mean_residual(inst.k_xs, identity, testing::random_vector(24, rng), inst.codes) > 1e-3);

  const auto single = make_instance(9, 2, 1, rng);
  const ProjectionMatrix p1 = projection_matrix(build_fair_basis(single.k_xs, single.k_s), single.k_xs);
  CHECK(fair_group_mean_residual(single.k_xs, p1, testing::random_vector(9, rng), single.codes) == 0.0);
}

TEST_CASE("duplicate rows are handled by the rank threshold") {
  std::mt19937_64 rng(10);
  auto rows = testing::random_rows(8, 2, 2, rng);
  const auto copy = rows;
  rows.insert(rows.end(), copy.begin(), copy.end());
  const ComposedKernel spec{LinearKernel{}, DeltaGroupKernel{}, Composition::Sum};
  const Matrix k = gram(spec, rows);
  const Matrix ks = gram(DeltaGroupKernel{}, rows);
  const FairBasis basis = build_fair_basis(k, ks);
  CHECK(basis.m == 1);
  const ProjectionMatrix p = projection_matrix(basis, k);
  CHECK((k * p.p * p.p - k * p.p).norm() <= 1e-8 * k.norm());
}

TEST_CASE("ignore-s kernel with group-independent features removes no direction it cannot see") {
  // Features identical across groups: the joint kernel cannot represent the
  // group indicator, so the sensitive direction collapses.
  std::vector<SampleRow> rows;
  for (int i = 0; i < 6; ++i) rows.push_back(SampleRow{{static_cast<double>(i % 3)}, i / 3, 0.0});
  const ComposedKernel ignore{LinearKernel{}, DeltaGroupKernel{}, Composition::IgnoreS};
  const Matrix k = gram(ignore, rows);
  const FairBasis basis = build_fair_basis(k, gram(DeltaGroupKernel{}, rows));
  CHECK(basis.m == 0);
}

TEST_CASE("projection_matrix dimension checks") {
  std::mt19937_64 rng(11);
  const auto inst = make_instance(6, 1, 2, rng);
  const FairBasis basis = build_fair_basis(inst.k_xs, inst.k_s);
  CHECK_THROWS_AS(projection_matrix(basis, Matrix::Identity(5, 5)), DimensionError);
  FairBasis full = basis;
  full.m = full.n;
  CHECK_THROWS_AS(projection_matrix(full, inst.k_xs), RangeError);
  CHECK_THROWS_AS(build_fair_basis(inst.k_xs, Matrix::Identity(5, 5)), DimensionError);
}
