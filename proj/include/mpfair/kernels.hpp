#pragma once

#include "mpfair/numerics.hpp"

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mpfair {

/// One observation: non-sensitive features, its sensitive group index and a
/// scalar representation of the sensitive attribute(s).
struct SampleRow {
  std::vector<double> x;
  int s_code = 0;
  double s_value = 0.0;
};

// Base kernels. Linear and Rbf read the non-sensitive features x,
// Polynomial and DeltaGroup read the sensitive attribute.
struct LinearKernel {};

struct RbfKernel {
  double gamma = 0.1;
};

/// (offset + s * s')^degree over the scalar sensitive value.
struct PolynomialKernel {
  int degree = 1;
  double offset = 1.0;
};

/// 1 when both rows fall in the same sensitive group, 0 otherwise.
struct DeltaGroupKernel {};

using BaseKernel = std::variant<LinearKernel, RbfKernel, PolynomialKernel, DeltaGroupKernel>;

enum class Composition { Sum, IgnoreS };

/// Joint kernel on (x, s). Sum adds the two parts; IgnoreS drops the
/// sensitive part so the regression never sees s.
struct ComposedKernel {
  BaseKernel x_part = LinearKernel{};
  BaseKernel s_part = DeltaGroupKernel{};
  Composition mode = Composition::Sum;
};

using KernelSpec =
    std::variant<LinearKernel, RbfKernel, PolynomialKernel, DeltaGroupKernel, ComposedKernel>;

enum class SensitiveFlavor { Delta, Polynomial };

/// Throws RangeError on invalid parameters (gamma <= 0, degree < 1, a
/// composed kernel whose parts read the wrong input).
void validate(const KernelSpec& spec);

bool reads_features(const BaseKernel& k);

std::string describe(const KernelSpec& spec);

double eval_kernel(const KernelSpec& spec, const SampleRow& a, const SampleRow& b);

Matrix gram(const KernelSpec& spec, std::span<const SampleRow> rows);

/// |test| x |train| matrix of kernel evaluations.
Matrix cross_gram(const KernelSpec& spec, std::span<const SampleRow> train,
                  std::span<const SampleRow> test);

/// A sensitive kernel whose centered features are linearly independent over
/// k distinct groups. The polynomial flavor uses degree k-1 (at least 1).
KernelSpec default_sensitive_kernel(std::size_t k, SensitiveFlavor flavor);

}  // namespace mpfair
