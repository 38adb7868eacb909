#include "mpfair/kernels.hpp"

#include "mpfair/errors.hpp"

#include <cmath>
#include <sstream>

namespace mpfair {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dims(const SampleRow& a, const SampleRow& b) {
  if (a.x.size() != b.x.size()) {
    throw DimensionError("kernel: feature dimension mismatch (" + std::to_string(a.x.size()) +
                         " vs " + std::to_string(b.x.size()) + ")");
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double eval_base(const BaseKernel& k, const SampleRow& a, const SampleRow& b) {
  return std::visit(
      overloaded{
          [&](const LinearKernel&) {
            check_dims(a, b);
            return dot(a.x, b.x);
          },
          [&](const RbfKernel& r) {
            check_dims(a, b);
            double dist2 = 0.0;
            for (std::size_t i = 0; i < a.x.size(); ++i) {
              const double diff = a.x[i] - b.x[i];
              dist2 += diff * diff;
            }
            return std::exp(-r.gamma * dist2);
          },
          [&](const PolynomialKernel& p) {
            return std::pow(p.offset + a.s_value * b.s_value, p.degree);
          },
          [&](const DeltaGroupKernel&) { return a.s_code == b.s_code ? 1.0 : 0.0; },
      },
      k);
}

void validate_base(const BaseKernel& k) {
  std::visit(overloaded{
                 [](const RbfKernel& r) {
                   if (!(r.gamma > 0.0)) throw RangeError("rbf kernel: gamma must be positive");
                 },
                 [](const PolynomialKernel& p) {
                   if (p.degree < 1) throw RangeError("polynomial kernel: degree must be >= 1");
                 },
                 [](const auto&) {},
             },
             k);
}

std::string describe_base(const BaseKernel& k) {
  std::ostringstream out;
  std::visit(overloaded{
                 [&](const LinearKernel&) { out << "linear"; },
                 [&](const RbfKernel& r) { out << "rbf(gamma=" << r.gamma << ")"; },
                 [&](const PolynomialKernel& p) {
                   out << "polynomial(degree=" << p.degree << ",offset=" << p.offset << ")";
                 },
                 [&](const DeltaGroupKernel&) { out << "delta_group"; },
             },
             k);
  return out.str();
}

BaseKernel as_base(const KernelSpec& spec) {
  return std::visit(overloaded{
                        [](const ComposedKernel&) -> BaseKernel {
                          throw RangeError("composed kernel is not a base kernel");
                        },
                        [](const auto& k) -> BaseKernel { return k; },
                    },
                    spec);
}

}  // namespace

bool reads_features(const BaseKernel& k) {
  return std::holds_alternative<LinearKernel>(k) || std::holds_alternative<RbfKernel>(k);
}

void validate(const KernelSpec& spec) {
  if (const auto* c = std::get_if<ComposedKernel>(&spec)) {
    validate_base(c->x_part);
    validate_base(c->s_part);
    if (!reads_features(c->x_part)) {
      throw RangeError("composed kernel: x_part must be linear or rbf");
    }
    if (reads_features(c->s_part)) {
      throw RangeError("composed kernel: s_part must be polynomial or delta_group");
    }
    return;
  }
  validate_base(as_base(spec));
}

std::string describe(const KernelSpec& spec) {
  if (const auto* c = std::get_if<ComposedKernel>(&spec)) {
    const char* mode = c->mode == Composition::Sum ? "sum" : "ignore_s";
    return std::string("composed(") + mode + "," + describe_base(c->x_part) + "," +
           describe_base(c->s_part) + ")";
  }
  return describe_base(as_base(spec));
}

double eval_kernel(const KernelSpec& spec, const SampleRow& a, const SampleRow& b) {
  if (const auto* c = std::get_if<ComposedKernel>(&spec)) {
    const double kx = eval_base(c->x_part, a, b);
    if (c->mode == Composition::IgnoreS) return kx;
    return kx + eval_base(c->s_part, a, b);
  }
  return eval_base(as_base(spec), a, b);
}

Matrix gram(const KernelSpec& spec, std::span<const SampleRow> rows) {
  if (rows.empty()) throw DimensionError("gram: no rows");
  validate(spec);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = eval_kernel(spec, rows[static_cast<std::size_t>(i)],
                                   rows[static_cast<std::size_t>(j)]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix cross_gram(const KernelSpec& spec, std::span<const SampleRow> train,
                  std::span<const SampleRow> test) {
  if (train.empty() || test.empty()) throw DimensionError("cross_gram: empty row set");
  validate(spec);
  Matrix k(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t j = 0; j < train.size(); ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          eval_kernel(spec, test[i], train[j]);
    }
  }
  return k;
}

KernelSpec default_sensitive_kernel(std::size_t k, SensitiveFlavor flavor) {
  if (k == 0) throw RangeError("default_sensitive_kernel: k must be at least 1");
  if (flavor == SensitiveFlavor::Delta) return DeltaGroupKernel{};
  // A single group imposes no constraint; degree 0 is not a valid kernel.
  const int degree = k > 1 ? static_cast<int>(k - 1) : 1;
  return PolynomialKernel{degree, 1.0};
}

}  // namespace mpfair
