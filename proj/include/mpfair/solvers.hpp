#pragma once

#include "mpfair/fair_subspace.hpp"
#include "mpfair/kernels.hpp"
#include "mpfair/numerics.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mpfair {

struct SquaredLoss {};

/// Quadratic inside |r| < beta, linear outside.
struct SmoothL1Loss {
  double beta = 1.0;
};

using LossSpec = std::variant<SquaredLoss, SmoothL1Loss>;

struct FixedStepGradient {
  double step = 1e-4;
};

struct AdaptiveMoment {
  double step = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerConfig {
  std::variant<FixedStepGradient, AdaptiveMoment> kind = AdaptiveMoment{};
  long max_iters = 10000;
  double grad_tol = 0.0;  // stop when the gradient infinity-norm drops below this
};

// Model variants, kept for reporting.
struct Unconstrained {};
struct Fair {};
struct Tradeoff {
  double alpha = 0.0;
};
struct Fpr {
  double zeta = 0.0;
};
struct GradientFair {
  LossSpec loss;
};
struct Constant {};

using ModelVariant = std::variant<Unconstrained, Fair, Tradeoff, Fpr, GradientFair, Constant>;

struct FittedModel {
  std::vector<SampleRow> train_rows;
  Vector weights;
  KernelSpec kernel = LinearKernel{};
  double lambda = 0.0;
  double intercept = 0.0;
  ModelVariant variant = Unconstrained{};
};

std::string variant_name(const ModelVariant& v);

/// w = (K K + lambda K)^+ K y.
Vector fit_unconstrained(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                         double lambda, double rtol = kDefaultRtol);

/// w = P (P^T K K P + lambda P^T K P)^+ P^T K y.
Vector fit_fair(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                double lambda, const ProjectionMatrix& p, double rtol = kDefaultRtol);

/// Full eigendecomposition of a Gram matrix, computed once and reused by the
/// spectral overloads below. Those give the same predictions as the
/// matrix-form solvers at the cost of one eigensolve instead of one per fit.
struct KernelSpectrum {
  Vector values;   // descending
  Matrix vectors;  // columns match `values`
};

KernelSpectrum kernel_spectrum(const Eigen::Ref<const Matrix>& k);

Vector fit_unconstrained(const KernelSpectrum& spectrum, const Eigen::Ref<const Vector>& y,
                         double lambda, double rtol = kDefaultRtol);

/// Minimises ||y - K w||^2 + lambda w^T K w subject to A^T K w = 0, i.e. the
/// fitted function is orthogonal to every fair-basis direction.
Vector fit_fair(const KernelSpectrum& spectrum, const Eigen::Ref<const Vector>& y, double lambda,
                const FairBasis& basis, double rtol = kDefaultRtol);

Vector fit_fpr(const KernelSpectrum& spectrum, const Eigen::Ref<const Vector>& y, double lambda,
               double zeta, const FairBasis& basis, double rtol = kDefaultRtol);

/// (1 - alpha) w_fair + alpha w_star.
Vector fit_tradeoff(const Eigen::Ref<const Vector>& w_fair, const Eigen::Ref<const Vector>& w_star,
                    double alpha);

/// Fair penalty regression:
/// w = (K K + lambda K + zeta K A K)^+ K y with A = sum_j a_j a_j^T.
Vector fit_fpr(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
               double lambda, double zeta, const FairBasis& basis, double rtol = kDefaultRtol);

/// Per-iteration hook for fit_gradient: iteration index (0 = initial point),
/// objective value, and the current train predictions K P v.
using GradientObserver =
    std::function<void(long iteration, double loss, const Vector& predictions)>;

/// First-order minimisation of sum_i loss(y_i, (K P v)_i) from v = 0.
/// Returns P v. `seed` is accepted for interface stability; the
/// optimisation itself is deterministic.
Vector fit_gradient(const Eigen::Ref<const Matrix>& k, const ProjectionMatrix& p,
                    const Eigen::Ref<const Vector>& y, const LossSpec& loss,
                    const OptimizerConfig& opt, std::uint64_t seed = 0,
                    const GradientObserver& observer = {});

double loss_value(const LossSpec& loss, const Eigen::Ref<const Vector>& y,
                  const Eigen::Ref<const Vector>& pred);

Vector predict(const FittedModel& model, std::span<const SampleRow> test_rows);

FittedModel constant_baseline(const Eigen::Ref<const Vector>& y_train);

struct MseBoundTerms {
  double fair_mse = 0.0;
  double unconstrained_mse = 0.0;
  double violation_term = 0.0;
};

/// Train-set terms of the fair-MSE bound, for w_star fitted with lambda = 0:
/// fair_mse <= unconstrained_mse + violation_term.
MseBoundTerms mse_bound_terms(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& w_star, const ProjectionMatrix& p,
                              double rtol = kDefaultRtol);

/// Same terms with the fair weights already fitted (lambda = 0).
MseBoundTerms mse_bound_terms(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& w_star,
                              const Eigen::Ref<const Vector>& w_fair, const ProjectionMatrix& p);

}  // namespace mpfair
