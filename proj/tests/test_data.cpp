#include "doctest.h"

#include "mpfair/data.hpp"
#include "mpfair/errors.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

using namespace mpfair;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mpfair_test_data";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const fs::path path = scratch(name);
  std::ofstream(path) << body;
  return path;
}

Vector primal_residual(const DataSet& ds) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto d = static_cast<Eigen::Index>(ds.rows[0].x.size());
  Matrix z(n, d + ds.s_raw.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = ds.rows[static_cast<std::size_t>(i)].x[static_cast<std::size_t>(j)];
    z.row(i).tail(ds.s_raw.cols()) = ds.s_raw.row(i);
  }
  const Vector coef = z.colPivHouseholderQr().solve(ds.y);
  return ds.y - z * coef;
}

}  // namespace

TEST_CASE("gen_synthetic") {
  SyntheticConfig tiny;
  tiny.n = 4;
  tiny.d = 1;
  tiny.noise_sd = 0.0;
  const DataSet t = gen_synthetic(tiny, 5);
  CHECK(t.size() == 4);
  CHECK(t.k == 2);
  CHECK(primal_residual(t).cwiseAbs().maxCoeff() <= 1e-10);

  SyntheticConfig clean;
  clean.n = 200;
  clean.noise_sd = 0.0;
  clean.e = 2;
  const DataSet c = gen_synthetic(clean, 6);
  CHECK(c.k == 4);
  CHECK(c.missing_groups().empty());
  CHECK(primal_residual(c).cwiseAbs().maxCoeff() <= 1e-10);

  // Group code encodes the sign pattern of the raw attributes.
  for (std::size_t i = 0; i < c.size(); ++i) {
    int code = 0;
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(std::abs(std::abs(c.s_raw(static_cast<Eigen::Index>(i), j)) - 0.1) < 1e-15);
      if (c.s_raw(static_cast<Eigen::Index>(i), j) > 0) code |= 1 << j;
    }
    CHECK(c.rows[i].s_code == code);
  }

  SyntheticConfig defaults;
  const DataSet a = gen_synthetic(defaults, 7);
  const DataSet b = gen_synthetic(defaults, 7);
  CHECK(a.size() == 2000);
  CHECK(a.rows[0].x.size() == 5);
  CHECK(a.y == b.y);
  CHECK(a.s_raw == b.s_raw);
  CHECK(gen_synthetic(defaults, 8).y != a.y);
  // Residual variance is the noise variance.
  const Vector r = primal_residual(a);
  CHECK(r.squaredNorm() / 2000.0 == doctest::Approx(0.1).epsilon(0.15));

  SyntheticConfig sine = clean;
  sine.link = Link::Sine;
  const DataSet s = gen_synthetic(sine, 9);
  CHECK(s.y.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("load_csv") {
  const auto simple = write_file("simple.csv", "x,s,y\n0.5,0,1.0\n1.5,1,2.0\n-1,1,0.25\n");
  CsvSchema schema{"y", {"s"}, {}, {}};
  const DataSet ds = load_csv(simple.string(), schema);
  CHECK(ds.size() == 3);
  CHECK(ds.k == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"x"});
  CHECK(ds.rows[1].x == std::vector<double>{1.5});
  CHECK(ds.group_codes() == std::vector<int>{0, 1, 1});
  CHECK(ds.y(2) == 0.25);

  CsvSchema missing{"target", {"s"}, {}, {}};
  try {
    load_csv(simple.string(), missing);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("target") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv(scratch("absent.csv").string(), schema), Error);

  const auto one_group = write_file("one_group.csv", "x,s,y\n0.5,0,1.0\n1.5,0,2.0\n");
  CHECK_THROWS_AS(load_csv(one_group.string(), schema), MissingGroupError);

  const auto non_binary = write_file("non_binary.csv", "x,s,y\n0.5,0,1.0\n1.5,0.7,2.0\n");
  CHECK_THROWS_AS(load_csv(non_binary.string(), schema), SchemaError);

  const auto dirty = write_file("dirty.csv", "x,s,y\n0.5,0,1.0\nfoo,1,2.0\n1.5,1,\n2.5,1,3\n");
  CsvSchema explicit_x{"y", {"s"}, {"x"}, {}};
  const DataSet cleaned = load_csv(dirty.string(), explicit_x);
  CHECK(cleaned.size() == 2);
  const auto& src = std::get<CsvSource>(cleaned.provenance);
  CHECK(src.rejected_rows == std::vector<std::size_t>{3, 4});

  // Text columns are not picked up as features automatically.
  const auto text = write_file("text.csv", "name,x,s,y\na,0.5,0,1.0\nb,1.5,1,2.0\n");
  CHECK(load_csv(text.string(), schema).feature_names == std::vector<std::string>{"x"});
}

TEST_CASE("load_csv with thresholded sensitive columns") {
  std::string body = "f1,a,b,c,d,target\n";
  for (int code = 0; code < 16; ++code) {
    for (int rep = 0; rep < 2; ++rep) {
      body += std::to_string(code * 0.1 + rep) + ",";
      for (int j = 0; j < 4; ++j) body += ((code >> j) & 1) ? "0.9," : "0.2,";
      body += std::to_string(code) + "\n";
    }
  }
  const auto path = write_file("communities.csv", body);
  CsvSchema schema{"target", {"a", "b", "c", "d"}, {"f1"}, {{"a", 0.5}, {"b", 0.5}, {"c", 0.5}, {"d", 0.5}}};
  const DataSet ds = load_csv(path.string(), schema);
  CHECK(ds.k == 16);
  CHECK(ds.missing_groups().empty());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.rows[i].s_code == static_cast<int>(ds.y(static_cast<Eigen::Index>(i))));
  CHECK(ds.s_raw.cols() == 4);
  CHECK(ds.s_raw(0, 0) == 0.2);
}

TEST_CASE("write_csv round trip") {
  SyntheticConfig cfg;
  cfg.n = 40;
  cfg.d = 2;
  const DataSet ds = gen_synthetic(cfg, 11);
  const auto path = scratch("roundtrip.csv");
  write_csv(ds, path.string());
  CsvSchema schema{"y", {}, {"x0", "x1"}, {}};
  schema.sensitive_columns = {"s_code"};
  const DataSet back = load_csv(path.string(), schema);
  CHECK(back.y == ds.y);
  CHECK(back.group_codes() == ds.group_codes());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.rows[i].x == ds.rows[i].x);
}

TEST_CASE("split") {
  SyntheticConfig cfg;
  cfg.n = 10;
  cfg.d = 1;
  const DataSet ds = gen_synthetic(cfg, 1);
  const SplitResult s = split(ds, 0.8, 3);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  const SplitResult again = split(ds, 0.8, 3);
  CHECK(again.train.y == s.train.y);
  CHECK(again.test.y == s.test.y);

  std::multiset<double> all(ds.y.data(), ds.y.data() + ds.y.size());
  std::multiset<double> parts(s.train.y.data(), s.train.y.data() + s.train.y.size());
  parts.insert(s.test.y.data(), s.test.y.data() + s.test.y.size());
  CHECK(all == parts);
  CHECK(s.train.missing_groups().empty());

  SyntheticConfig big;
  const SplitResult b = split(gen_synthetic(big, 2), 0.8, 4);
  CHECK(b.train.size() == 1600);
  CHECK(b.test.size() == 400);

  CHECK_THROWS_AS(split(ds, 1.5, 1), RangeError);
  CHECK_THROWS_AS(split(ds, 0.05, 1), SplitError);
}

TEST_CASE("center_targets") {
  SyntheticConfig cfg;
  cfg.n = 3;
  cfg.d = 1;
  DataSet train = gen_synthetic(cfg, 1).take({0, 1});
  DataSet test = gen_synthetic(cfg, 1).take({2});
  train.y = Eigen::Vector2d(1, 3);
  test.y = Vector::Constant(1, 2.0);
  const Centered c = center_targets(train, test);
  CHECK(c.mean == 2.0);
  CHECK(c.train.y == Vector(Eigen::Vector2d(-1, 1)));
  CHECK(c.test.y(0) == 0.0);

  const Centered again = center_targets(c.train, c.test);
  CHECK(std::abs(again.mean) <= 1e-12);
  CHECK((again.train.y - c.train.y).cwiseAbs().maxCoeff() <= 1e-12);

  SyntheticConfig big;
  big.n = 500;
  const SplitResult s = split(gen_synthetic(big, 3), 0.8, 3);
  const Centered r = center_targets(s.train, s.test);
  const double sd = std::sqrt((r.train.y.array() - r.train.y.mean()).square().mean());
  CHECK(std::abs(r.train.y.mean()) <= 1e-12 * sd);
}

TEST_CASE("subsample") {
  SyntheticConfig cfg;
  cfg.n = 100;
  const DataSet ds = gen_synthetic(cfg, 1);
  const DataSet all = subsample(ds, 100, 5);
  std::vector<double> a(ds.y.data(), ds.y.data() + 100), b(all.y.data(), all.y.data() + 100);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  const DataSet part = subsample(ds, 30, 5);
  CHECK(part.size() == 30);
  CHECK(subsample(ds, 30, 5).y == part.y);
  CHECK_THROWS_AS(subsample(ds, 101, 5), RangeError);
}

TEST_CASE("derive_seed") {
  CHECK(derive_seed(1, "split") == derive_seed(1, "split"));
  CHECK(derive_seed(1, "split") != derive_seed(1, "data"));
  CHECK(derive_seed(1, "split") != derive_seed(2, "split"));
}
