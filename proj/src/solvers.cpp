#include "mpfair/solvers.hpp"

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

void check_system(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                  double lambda, const char* what) {
  if (k.rows() != k.cols() || k.rows() != y.size()) {
    throw DimensionError(std::string(what) + ": K and y dimensions disagree");
  }
  if (!y.allFinite()) throw NumericError(std::string(what) + ": non-finite target");
  if (!(lambda >= 0.0)) throw RangeError(std::string(what) + ": lambda must be >= 0");
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Per-sample loss derivative with respect to the prediction.
Vector loss_gradient(const LossSpec& loss, const Vector& y, const Vector& pred) {
  return std::visit(overloaded{
                        [&](const SquaredLoss&) -> Vector { return 2.0 * (pred - y); },
                        [&](const SmoothL1Loss& l) -> Vector {
                          const Vector r = pred - y;
                          return r.unaryExpr([beta = l.beta](double v) {
                            return std::abs(v) < beta ? v / beta : (v > 0 ? 1.0 : -1.0);
                          });
                        },
                    },
                    loss);
}

// Eigenpairs of K kept by the same relative cutoff that pinv_sym applies to
// K K + lambda K.
struct Reduced {
  Matrix u;
  Vector lam;
  Vector shrink;  // lam / (lam + lambda)
  Vector uty;     // U^T y
};

Reduced reduce(const KernelSpectrum& s, const Eigen::Ref<const Vector>& y, double lambda,
               double rtol, const char* what) {
  const Eigen::Index n = s.vectors.rows();
  if (s.vectors.cols() != n || s.values.size() != n || y.size() != n) {
    throw DimensionError(std::string(what) + ": spectrum and y dimensions disagree");
  }
  if (!y.allFinite()) throw NumericError(std::string(what) + ": non-finite target");
  if (!(lambda >= 0.0)) throw RangeError(std::string(what) + ": lambda must be >= 0");
  if (!(rtol > 0.0)) throw RangeError(std::string(what) + ": rtol must be positive");
  Reduced r;
  if (n == 0) return r;
  const Vector normal = s.values.array().square() + lambda * s.values.array();
  const double cutoff = rtol * normal.cwiseAbs().maxCoeff();
  Eigen::Index keep = 0;
  while (keep < n && s.values(keep) > 0.0 && normal(keep) > cutoff) ++keep;
  r.u = s.vectors.leftCols(keep);
  r.lam = s.values.head(keep);
  r.shrink = r.lam.array() / (r.lam.array() + lambda);
  r.uty = r.u.transpose() * y;
  return r;
}

}  // namespace

std::string variant_name(const ModelVariant& v) {
  std::ostringstream out;
  std::visit(overloaded{
                 [&](const Unconstrained&) { out << "unconstrained"; },
                 [&](const Fair&) { out << "fair"; },
                 [&](const Tradeoff& t) { out << "tradeoff(alpha=" << t.alpha << ")"; },
                 [&](const Fpr& f) { out << "fpr(zeta=" << f.zeta << ")"; },
                 [&](const GradientFair& g) {
                   out << (std::holds_alternative<SquaredLoss>(g.loss) ? "gradient(squared)"
                                                                       : "gradient(smooth_l1)");
                 },
                 [&](const Constant&) { out << "constant"; },
             },
             v);
  return out.str();
}

Vector fit_unconstrained(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                         double lambda, double rtol) {
  check_system(k, y, lambda, "fit_unconstrained");
  const Matrix normal = symmetrized(k * k + lambda * k);
  return pinv_sym(normal, rtol) * (k * y);
}

Vector fit_fair(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                double lambda, const ProjectionMatrix& p, double rtol) {
  check_system(k, y, lambda, "fit_fair");
  if (p.p.rows() != k.rows() || p.p.cols() != k.cols()) {
    throw DimensionError("fit_fair: projection size does not match K");
  }
  if (p.removed == 0) return fit_unconstrained(k, y, lambda, rtol);

  const Matrix kp = k * p.p;
  const Matrix normal = symmetrized(kp.transpose() * kp + lambda * (p.p.transpose() * kp));
  return p.p * (pinv_sym(normal, rtol) * (kp.transpose() * y));
}

KernelSpectrum kernel_spectrum(const Eigen::Ref<const Matrix>& k) {
  const EigenResult eig = sym_eig(k);
  return {eig.values, eig.vectors};
}

// In the kept eigenbasis w = U a the objective is diagonal:
// D = diag(lam^2 + lambda lam), linear term b = lam * U^T y, so the
// unconstrained minimiser is a = U^T y / (lam + lambda). The fairness
// directions enter through B = diag(lam) U^T A.

Vector fit_unconstrained(const KernelSpectrum& spectrum, const Eigen::Ref<const Vector>& y,
                         double lambda, double rtol) {
  const Reduced r = reduce(spectrum, y, lambda, rtol, "fit_unconstrained");
  if (r.u.cols() == 0) return Vector::Zero(y.size());
  return r.u * (r.uty.array() / (r.lam.array() + lambda)).matrix();
}

Vector fit_fair(const KernelSpectrum& spectrum, const Eigen::Ref<const Vector>& y, double lambda,
                const FairBasis& basis, double rtol) {
  if (basis.coeffs.rows() != y.size()) throw DimensionError("fit_fair: basis size does not match y");
  const Reduced r = reduce(spectrum, y, lambda, rtol, "fit_fair");
  if (r.u.cols() == 0) return Vector::Zero(y.size());
  const Vector a0 = r.uty.array() / (r.lam.array() + lambda);
  if (basis.m == 0) return r.u * a0;

  // Lagrange conditions: a = a0 - D^-1 B mu with (B^T D^-1 B) mu = B^T a0.
  const Matrix g = r.u.transpose() * basis.coeffs;
  const Matrix d_inv_b = g.array().colwise() / (r.lam.array() + lambda);
  Matrix schur = g.transpose() * r.shrink.asDiagonal() * g;
  schur = 0.5 * (schur + schur.transpose());
  const Vector mu = pinv_sym(schur, rtol) * (g.transpose() * r.shrink.cwiseProduct(r.uty));
  return r.u * (a0 - d_inv_b * mu);
}

Vector fit_fpr(const KernelSpectrum& spectrum, const Eigen::Ref<const Vector>& y, double lambda,
               double zeta, const FairBasis& basis, double rtol) {
  if (!(zeta >= 0.0)) throw RangeError("fit_fpr: zeta must be >= 0");
  if (basis.coeffs.rows() != y.size()) throw DimensionError("fit_fpr: basis size does not match y");
  const Reduced r = reduce(spectrum, y, lambda, rtol, "fit_fpr");
  if (r.u.cols() == 0) return Vector::Zero(y.size());
  const Vector a0 = r.uty.array() / (r.lam.array() + lambda);
  if (basis.m == 0 || zeta == 0.0) return r.u * a0;

  // (D + zeta B B^T)^-1 by the Woodbury identity.
  const Matrix g = r.u.transpose() * basis.coeffs;
  const Matrix d_inv_b = g.array().colwise() / (r.lam.array() + lambda);
  Matrix inner = g.transpose() * r.shrink.asDiagonal() * g;
  inner.diagonal().array() += 1.0 / zeta;
  inner = 0.5 * (inner + inner.transpose());
  const Vector rhs = g.transpose() * r.shrink.cwiseProduct(r.uty);
  return r.u * (a0 - d_inv_b * inner.ldlt().solve(rhs));
}

Vector fit_tradeoff(const Eigen::Ref<const Vector>& w_fair, const Eigen::Ref<const Vector>& w_star,
                    double alpha) {
  if (w_fair.size() != w_star.size()) throw DimensionError("fit_tradeoff: weight lengths differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("fit_tradeoff: alpha must lie in [0, 1]");
  return (1.0 - alpha) * w_fair + alpha * w_star;
}

Vector fit_fpr(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
               double lambda, double zeta, const FairBasis& basis, double rtol) {
  check_system(k, y, lambda, "fit_fpr");
  if (!(zeta >= 0.0)) throw RangeError("fit_fpr: zeta must be >= 0");
  if (basis.coeffs.rows() != k.rows()) throw DimensionError("fit_fpr: basis size does not match K");

  Matrix normal = k * k + lambda * k;
  if (basis.m > 0) {
    const Matrix ka = k * basis.coeffs;  // K A K = (K a)(K a)^T summed over the basis
    normal.noalias() += zeta * (ka * ka.transpose());
  }
  return pinv_sym(symmetrized(normal), rtol) * (k * y);
}

double loss_value(const LossSpec& loss, const Eigen::Ref<const Vector>& y,
                  const Eigen::Ref<const Vector>& pred) {
  const Vector r = pred - y;
  return std::visit(overloaded{
                        [&](const SquaredLoss&) { return r.squaredNorm(); },
                        [&](const SmoothL1Loss& l) {
                          double acc = 0.0;
                          for (Eigen::Index i = 0; i < r.size(); ++i) {
                            const double a = std::abs(r(i));
                            acc += a < l.beta ? 0.5 * a * a / l.beta : a - 0.5 * l.beta;
                          }
                          return acc;
                        },
                    },
                    loss);
}

Vector fit_gradient(const Eigen::Ref<const Matrix>& k, const ProjectionMatrix& p,
                    const Eigen::Ref<const Vector>& y_in, const LossSpec& loss,
                    const OptimizerConfig& opt, std::uint64_t /*seed*/,
                    const GradientObserver& observer) {
  check_system(k, y_in, 0.0, "fit_gradient");
  if (p.p.rows() != k.rows()) throw DimensionError("fit_gradient: projection size does not match K");
  if (const auto* l = std::get_if<SmoothL1Loss>(&loss); l && !(l->beta > 0.0)) {
    throw RangeError("fit_gradient: smooth_l1 beta must be positive");
  }
  if (opt.max_iters < 0) throw RangeError("fit_gradient: max_iters must be >= 0");
  std::visit(overloaded{
                 [](const FixedStepGradient& g) {
                   if (!(g.step > 0.0)) throw RangeError("fit_gradient: step must be positive");
                 },
                 [](const AdaptiveMoment& a) {
                   if (!(a.step > 0.0) || a.beta1 < 0.0 || a.beta1 >= 1.0 || a.beta2 < 0.0 ||
                       a.beta2 >= 1.0 || !(a.epsilon > 0.0)) {
                     throw RangeError("fit_gradient: invalid adaptive-moment parameters");
                   }
                 },
             },
             opt.kind);

  const Vector y = y_in;
  const Eigen::Index n = k.rows();
  const Matrix kp = k * p.p;
  Vector v = Vector::Zero(n);
  Vector first = Vector::Zero(n);
  Vector second = Vector::Zero(n);
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  Vector pred = Vector::Zero(n);
  for (long it = 0;; ++it) {
    const double value = loss_value(loss, y, pred);
    if (!std::isfinite(value)) {
      throw DivergenceError("fit_gradient: loss became non-finite at iteration " + std::to_string(it),
                            it);
    }
    if (observer) observer(it, value, pred);
    if (it >= opt.max_iters) break;

    const Vector grad = kp.transpose() * loss_gradient(loss, y, pred);
    if (opt.grad_tol > 0.0 && grad.cwiseAbs().maxCoeff() < opt.grad_tol) break;

    if (const auto* g = std::get_if<FixedStepGradient>(&opt.kind)) {
      v.noalias() -= g->step * grad;
    } else {
      const auto& a = std::get<AdaptiveMoment>(opt.kind);
      first = a.beta1 * first + (1.0 - a.beta1) * grad;
      second = a.beta2 * second + (1.0 - a.beta2) * grad.cwiseAbs2();
      beta1_pow *= a.beta1;
      beta2_pow *= a.beta2;
      const double c1 = 1.0 - beta1_pow;
      const double c2 = 1.0 - beta2_pow;
      v.array() -= a.step * (first.array() / c1) / ((second.array() / c2).sqrt() + a.epsilon);
    }
    pred.noalias() = kp * v;
  }
  return p.p * v;
}

Vector predict(const FittedModel& model, std::span<const SampleRow> test_rows) {
  const auto count = static_cast<Eigen::Index>(test_rows.size());
  if (model.weights.size() == 0) return Vector::Constant(count, model.intercept);
  if (static_cast<std::size_t>(model.weights.size()) != model.train_rows.size()) {
    throw DimensionError("predict: weights do not match training rows");
  }
  if (count == 0) return Vector(0);
  Vector out = cross_gram(model.kernel, model.train_rows, test_rows) * model.weights;
  out.array() += model.intercept;
  return out;
}

FittedModel constant_baseline(const Eigen::Ref<const Vector>& y_train) {
  if (y_train.size() == 0) throw DimensionError("constant_baseline: no targets");
  FittedModel model;
  model.weights = Vector(0);
  model.intercept = y_train.mean();
  model.variant = Constant{};
  return model;
}

MseBoundTerms mse_bound_terms(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& w_star, const ProjectionMatrix& p,
                              double rtol) {
  check_system(k, y, 0.0, "mse_bound_terms");
  if (w_star.size() != y.size()) throw DimensionError("mse_bound_terms: w_star length");
  return mse_bound_terms(k, y, w_star, fit_fair(k, y, 0.0, p, rtol), p);
}

MseBoundTerms mse_bound_terms(const Eigen::Ref<const Matrix>& k, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& w_star,
                              const Eigen::Ref<const Vector>& w_fair, const ProjectionMatrix& p) {
  check_system(k, y, 0.0, "mse_bound_terms");
  if (w_star.size() != y.size() || w_fair.size() != y.size()) {
    throw DimensionError("mse_bound_terms: weight length");
  }
  if (p.p.rows() != k.rows()) throw DimensionError("mse_bound_terms: projection size does not match K");
  const double n = static_cast<double>(y.size());
  const Vector f_star = k * w_star;
  const Vector f_proj = k * (p.p * w_star);

  MseBoundTerms out;
  out.fair_mse = (y - k * w_fair).squaredNorm() / n;
  out.unconstrained_mse = (y - f_star).squaredNorm() / n;
  out.violation_term = (f_star - f_proj).squaredNorm() / n;
  return out;
}

}  // namespace mpfair
