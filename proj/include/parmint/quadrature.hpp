#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "parmint/expr.hpp"

namespace parmint {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class QuadStatus { converged, max_depth_reached, evaluation_fault };

const char* quad_status_name(QuadStatus s);

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  long evaluations = 0;
  QuadStatus status = QuadStatus::converged;
};

/// Tolerances and step policies shared across the kernels and the
/// finite-difference derivative checks.
struct ToleranceConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int max_depth = 18;        // bisection levels, finite kernel
  int de_max_level = 12;     // level doublings, double-exponential kernels
  int osc_max_periods = 200; // half-period cells, oscillatory kernel

  double target(double value_scale) const;

  // h = cbrt(eps)*max(1,|x|) for first derivatives,
  // h = eps^(1/4)*max(1,|x|) for second derivatives.
  static double fd_step_first(double x);
  static double fd_step_second(double x);
};

/// Removable-singularity patch: within `radius` of `point` the integrand
/// reports `value` instead of evaluating the formula.
struct Patch {
  double point;
  double value;
  double radius;
};

inline constexpr double kDefaultPatchRadius = 1e-8;  // scaled by max(1,|x0|)

/// Callable integrand with removable-singularity patches. Evaluation
/// faults surface as EvalError; kernels convert them to an
/// evaluation_fault status.
class Integrand {
 public:
  Integrand() = default;
  explicit Integrand(std::function<double(double)> f, std::vector<Patch> patches = {})
      : f_(std::move(f)), patches_(std::move(patches)) {}

  double operator()(double x) const {
    for (const Patch& p : patches_)
      if (std::abs(x - p.point) <= p.radius) return p.value;
    return f_(x);
  }

  const std::vector<Patch>& patches() const { return patches_; }

 private:
  std::function<double(double)> f_;
  std::vector<Patch> patches_;
};

enum class OscKind { sine, cosine };

struct Oscillation {
  double omega = 0.0;
  OscKind kind = OscKind::sine;
};

/// Bounded-at-infinity oscillation with phase coef/x^2; the cells
/// accumulate at x = 0. Builtin catalog entries only.
struct InverseSquarePhase {
  double coefficient = 0.0;
  OscKind kind = OscKind::cosine;
};

struct QuadHints {
  bool singular_lower = false;
  bool singular_upper = false;
  bool decay = false;
  std::optional<Oscillation> oscillation;
  std::optional<InverseSquarePhase> inv_square_phase;
};

/// Adaptive 15-point Gauss-Kronrod with interval bisection.
QuadratureResult integrate_finite(const Integrand& f, double a, double b,
                                  const ToleranceConfig& tol);

/// Double-exponential rule for finite intervals; tolerates integrable
/// endpoint singularities.
QuadratureResult integrate_tanh_sinh(const Integrand& f, double a, double b,
                                     const ToleranceConfig& tol);

/// Double-exponential rule on [a, inf) for eventually decaying integrands.
QuadratureResult integrate_exp_sinh(const Integrand& f, double a,
                                    const ToleranceConfig& tol);

/// Conditionally convergent tails: integrates f_env(x)*trig(omega x) over
/// half-period cells and accelerates the partial sums.
QuadratureResult integrate_oscillatory(const Integrand& f_env, double a, double omega,
                                       OscKind kind, const ToleranceConfig& tol);

/// Kernel dispatch from catalog hints. Infinite bounds use kInf; doubly
/// infinite domains split at zero (no symmetry assumed).
QuadratureResult integrate_auto(const Integrand& f, double lower, double upper,
                                const QuadHints& hints, const ToleranceConfig& tol);

}  // namespace parmint
