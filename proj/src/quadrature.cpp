#include "parmint/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace parmint {

const char* quad_status_name(QuadStatus s) {
  switch (s) {
    case QuadStatus::converged: return "converged";
    case QuadStatus::max_depth_reached: return "max_depth_reached";
    case QuadStatus::evaluation_fault: return "evaluation_fault";
  }
  return "?";
}

double ToleranceConfig::target(double value_scale) const {
  return std::max(abs_tol, rel_tol * std::fabs(value_scale));
}

double ToleranceConfig::fd_step_first(double x) {
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  return h0 * std::max(1.0, std::fabs(x));
}

double ToleranceConfig::fd_step_second(double x) {
  static const double h0 = std::sqrt(std::sqrt(std::numeric_limits<double>::epsilon()));
  return h0 * std::max(1.0, std::fabs(x));
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct FaultSignal {};

// Integrand call with fault normalization: EvalError or a non-finite
// value aborts the enclosing kernel.
double call(const Integrand& f, double x, long& evals) {
  ++evals;
  double v;
  try {
    v = f(x);
  } catch (const EvalError&) {
    throw FaultSignal{};
  }
  if (!std::isfinite(v)) throw FaultSignal{};
  return v;
}

QuadratureResult fault_result(long evals) {
  QuadratureResult r;
  r.value = std::numeric_limits<double>::quiet_NaN();
  r.error_estimate = kInf;
  r.evaluations = std::max(evals, 1L);
  r.status = QuadStatus::evaluation_fault;
  return r;
}

QuadratureResult finish(double value, double err, long evals, const ToleranceConfig& cfg) {
  QuadratureResult r;
  r.value = value;
  r.error_estimate = err;
  r.evaluations = evals;
  r.status = err <= cfg.target(value) ? QuadStatus::converged : QuadStatus::max_depth_reached;
  return r;
}

// ---------------------------------------------------------------------------
// 15-point Gauss-Kronrod panel
//
// Kronrod abscissae (positive half), Kronrod weights, embedded Gauss-7
// weights. Hex literals pin the exact doubles.

constexpr double kXgk[8] = {
    0x1.fba009d4d09b1p-1,  // 0.99145537112081261
    0x1.e5f178e7c6229p-1,  // 0.94910791234275849
    0x1.bacf827b9bb3ep-1,  // 0.86486442335976907
    0x1.7ba9f9be3a1d6p-1,  // 0.74153118559939446
    0x1.2c13a049dfa24p-1,  // 0.58608723546769115
    0x1.9f95df119fd62p-2,  // 0.40584515137739718
    0x1.a98b2892e0c77p-3,  // 0.20778495500789848
    0x0p+0,
};
constexpr double kWgk[8] = {
    0x1.77c5b67d5747p-6,   // 0.022935322010529224
    0x1.026cdaa7b61c4p-4,  // 0.063092092629978558
    0x1.ad384a34814c6p-4,  // 0.10479001032225019
    0x1.200ed0f46e8c1p-3,  // 0.14065325971552592
    0x1.5a1f266e47d5cp-3,  // 0.16900472663926791
    0x1.85d6861c80eb1p-3,  // 0.19035057806478542
    0x1.a2adbcbec9cd8p-3,  // 0.20443294007529889
    0x1.ad04f9087090fp-3,  // 0.20948214108472782
};
constexpr double kWg[4] = {
    0x1.092f69f826d57p-3,  // 0.1294849661688697
    0x1.1e6b1713d8644p-2,  // 0.27970539148927664
    0x1.86fe74ee32b3dp-2,  // 0.38183005050511892
    0x1.abfd7e03c2fa6p-2,  // 0.4179591836734694
};

struct Panel {
  double integral;
  double err;
};

Panel gk15(const Integrand& f, double a, double b, long& evals) {
  const double xc = 0.5 * (a + b);
  const double h = 0.5 * (b - a);

  double fv[15];
  const double fc = call(f, xc, evals);
  double resk = kWgk[7] * fc;
  double resg = kWg[3] * fc;
  double resabs = kWgk[7] * std::fabs(fc);
  fv[14] = fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = call(f, xc - dx, evals);
    const double f2 = call(f, xc + dx, evals);
    fv[2 * j] = f1;
    fv[2 * j + 1] = f2;
    resk += kWgk[j] * (f1 + f2);
    resabs += kWgk[j] * (std::fabs(f1) + std::fabs(f2));
    if (j % 2 == 1) resg += kWg[(j - 1) / 2] * (f1 + f2);
  }

  const double mean = 0.5 * resk;
  double resasc = kWgk[7] * std::fabs(fc - mean);
  for (int j = 0; j < 7; ++j)
    resasc += kWgk[j] * (std::fabs(fv[2 * j] - mean) + std::fabs(fv[2 * j + 1] - mean));

  const double habs = std::fabs(h);
  double err = std::fabs((resk - resg) * h);
  resasc *= habs;
  resabs *= habs;
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps))
    err = std::max(err, 50.0 * kEps * resabs);
  return {resk * h, err};
}

struct FiniteAccum {
  double sum = 0.0;
  double errsum = 0.0;
};

// Depth-first bisection, left to right, with a length-proportional error
// budget; the summation order is fixed, so results are reproducible.
void refine(const Integrand& f, double a, double b, const Panel& p, double budget,
            int depth, const ToleranceConfig& cfg, long& evals, FiniteAccum& acc) {
  if (p.err <= budget || depth >= cfg.max_depth) {
    acc.sum += p.integral;
    acc.errsum += p.err;
    return;
  }
  const double mid = 0.5 * (a + b);
  const Panel left = gk15(f, a, mid, evals);
  const Panel right = gk15(f, mid, b, evals);
  refine(f, a, mid, left, 0.5 * budget, depth + 1, cfg, evals, acc);
  refine(f, mid, b, right, 0.5 * budget, depth + 1, cfg, evals, acc);
}

}  // namespace

QuadratureResult integrate_finite(const Integrand& f, double a, double b,
                                  const ToleranceConfig& cfg) {
  long evals = 0;
  try {
    const Panel whole = gk15(f, a, b, evals);
    const double budget = cfg.target(whole.integral);
    FiniteAccum acc;
    refine(f, a, b, whole, budget, 0, cfg, evals, acc);
    return finish(acc.sum, acc.errsum, evals, cfg);
  } catch (const FaultSignal&) {
    return fault_result(evals);
  }
}

// ---------------------------------------------------------------------------
// double-exponential cores
//
// Trapezoid sums over t with level doubling: the accumulated term total is
// kept and only rescaled by the halved step, so previous levels are never
// recomputed. Each sweep direction truncates when terms drop below the
// noise floor and stops outright once the abscissa is no longer
// representable away from the endpoint; integrands are never evaluated at
// a singular endpoint.

namespace {

constexpr double kTMax = 6.9;

struct DeTerm {
  double value = 0.0;
  bool stop = false;  // end this sweep direction, term excluded
};

// term(t) must return w(t)*f(x(t)) for the chosen transform.
template <typename TermFn>
QuadratureResult de_core(TermFn&& term, const ToleranceConfig& cfg, long& evals) {
  double h = 0.5;
  DeTerm t0 = term(0.0, evals);
  double terms = t0.stop ? 0.0 : t0.value;
  double value = 0.0, prev1 = 0.0, prev2 = 0.0, err = kInf;

  for (int level = 0; level <= cfg.de_max_level; ++level) {
    if (level > 0) h *= 0.5;
    const int stride = level == 0 ? 1 : 2;
    double add = 0.0;
    for (int dir = -1; dir <= 1; dir += 2) {
      int quiet = 0;
      for (int k = 1;; k += stride) {
        const double t = dir * k * h;
        if (std::fabs(t) > kTMax) break;
        DeTerm e = term(t, evals);
        if (e.stop) break;
        add += e.value;
        const double scale = std::max(std::fabs(terms + add), 1e-3);
        if (std::fabs(e.value) <= 1e-3 * kEps * scale) {
          if (++quiet >= 2) break;
        } else {
          quiet = 0;
        }
      }
    }
    terms += add;
    value = h * terms;

    if (level >= 2) {
      const double d1 = std::fabs(value - prev1);
      const double d2 = std::fabs(prev1 - prev2);
      if (d1 == 0.0)
        err = 0.5 * kEps * std::fabs(value);
      else if (d2 > d1)
        err = std::max(d1 * d1 / d2, kEps * std::fabs(value));
      else
        err = d1;
      if (err <= 0.5 * cfg.target(value)) return {value, err, 0, QuadStatus::converged};
    }
    prev2 = prev1;
    prev1 = value;
  }
  QuadratureResult r{value, err, 0, QuadStatus::max_depth_reached};
  if (err <= cfg.target(value)) r.status = QuadStatus::converged;
  return r;
}

// sigma(t) = 1 - tanh((pi/2) sinh t), evaluated without cancellation.
inline double de_sigma(double u) {
  // u = (pi/2) sinh t; sigma = 2 / (1 + e^{2u})
  if (u > 360.0) return 0.0;
  return 2.0 / (1.0 + std::exp(2.0 * u));
}

// One half of a finite interval, rectified so that an endpoint
// singularity of the form (x-e)^(-p), p < 1, becomes bounded or mild:
// x = e + dir*s^2 with s in (0, S]. The DE transform is applied in s.
template <bool kUpper>
QuadratureResult de_sqrt_half(const Integrand& f, double endpoint, double other,
                              const ToleranceConfig& cfg, long& evals) {
  const double span = std::fabs(other - endpoint);
  if (span == 0.0) return {0.0, 0.0, 0, QuadStatus::converged};
  const double S = std::sqrt(span);
  const double c = 0.5 * S;  // half-width in s

  // For the upper half, x = endpoint - s^2 maps increasing s to decreasing
  // x, and the orientation flip of the x-interval cancels the Jacobian
  // sign, so both halves contribute positively.
  auto term = [&](double t, long& ev) -> DeTerm {
    const double u = M_PI_2 * std::sinh(t);
    const double sig = de_sigma(std::fabs(u));
    double s;
    if (u >= 0.0)
      s = S - c * sig;  // approaching the interior end s = S
    else
      s = c * sig;      // approaching the rectified endpoint s = 0
    if (s <= 0.0 || s >= S) return {0.0, true};
    const double x = kUpper ? endpoint - s * s : endpoint + s * s;
    if (x == endpoint) return {0.0, true};  // below representable offset
    if (kUpper ? x <= other : x >= other) return {0.0, true};
    const double sech2 = sig * (2.0 - sig);  // 1 - tanh^2(u), cancellation-free
    const double w = M_PI_2 * std::cosh(t) * sech2 * c;
    return {w * 2.0 * s * call(f, x, ev), false};
  };
  return de_core(term, cfg, evals);
}

}  // namespace

QuadratureResult integrate_tanh_sinh(const Integrand& f, double a, double b,
                                     const ToleranceConfig& cfg) {
  long evals = 0;
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) return fault_result(evals);
  const double mid = 0.5 * (a + b);
  try {
    ToleranceConfig half = cfg;
    half.rel_tol = 0.5 * cfg.rel_tol;
    half.abs_tol = 0.5 * cfg.abs_tol;
    QuadratureResult lo = de_sqrt_half<false>(f, a, mid, half, evals);
    QuadratureResult hi = de_sqrt_half<true>(f, b, mid, half, evals);
    return finish(lo.value + hi.value, lo.error_estimate + hi.error_estimate, evals, cfg);
  } catch (const FaultSignal&) {
    return fault_result(evals);
  }
}

QuadratureResult integrate_exp_sinh(const Integrand& f, double a,
                                    const ToleranceConfig& cfg) {
  long evals = 0;
  if (!std::isfinite(a)) return fault_result(evals);
  auto term = [&](double t, long& ev) -> DeTerm {
    const double u = M_PI_2 * std::sinh(t);
    if (u > 700.0) return {0.0, true};  // e^u overflows; decay hypothesis ends the sweep
    const double r = std::exp(u);
    const double x = a + r;
    if (x == a) return {0.0, true};  // below representable offset from a
    const double w = M_PI_2 * std::cosh(t) * r;
    if (!std::isfinite(w)) return {0.0, true};
    return {w * call(f, x, ev), false};
  };
  try {
    QuadratureResult r = de_core(term, cfg, evals);
    r.evaluations = evals;
    return r;
  } catch (const FaultSignal&) {
    return fault_result(evals);
  }
}

// ---------------------------------------------------------------------------
// oscillatory kernel: half-period cells + epsilon-algorithm acceleration

namespace {

// Wynn's epsilon algorithm over the given partial sums; returns the best
// even-column entry reached.
double epsilon_extrapolate(const std::vector<double>& s) {
  const std::size_t n = s.size();
  if (n == 0) return 0.0;
  std::vector<double> prev(n + 1, 0.0);  // epsilon_{-1} = 0
  std::vector<double> cur = s;           // epsilon_0
  double best = cur.back();
  int col = 0;
  while (cur.size() >= 2) {
    std::vector<double> next(cur.size() - 1);
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      const double d = cur[i + 1] - cur[i];
      if (!std::isfinite(d) || std::fabs(d) < 1e-305) return best;
      next[i] = prev[i + 1] + 1.0 / d;
      if (!std::isfinite(next[i])) return best;
    }
    prev = std::move(cur);
    cur = std::move(next);
    ++col;
    if (col % 2 == 0) best = cur.back();
  }
  return best;
}

// Sums GK cell integrals between the supplied boundaries and accelerates
// the partial-sum sequence; `head` (the stub before the first boundary)
// is folded into every partial sum.
QuadratureResult sum_cells(const Integrand& f, double head, double head_err,
                           const std::function<double(int)>& boundary, int max_cells,
                           const ToleranceConfig& cfg, long& evals) {
  ToleranceConfig cell_cfg = cfg;
  cell_cfg.rel_tol = std::max(0.1 * cfg.rel_tol, 1e-14);
  cell_cfg.abs_tol = 0.01 * cfg.abs_tol;
  cell_cfg.max_depth = std::min(cfg.max_depth, 14);

  std::vector<double> partial;
  partial.reserve(64);
  double run = head;
  double cell_err = head_err;
  double est = head, prev_est = kInf;
  int stable = 0;

  for (int k = 0; k < max_cells; ++k) {
    const double x0 = boundary(k);
    const double x1 = boundary(k + 1);
    Panel p = gk15(f, x0, x1, evals);
    if (p.err > cell_cfg.target(p.integral)) {
      FiniteAccum acc;
      refine(f, x0, x1, p, cell_cfg.target(p.integral), 0, cell_cfg, evals, acc);
      p.integral = acc.sum;
      p.err = acc.errsum;
    }
    run += p.integral;
    cell_err += p.err;
    partial.push_back(run);

    if (partial.size() >= 4) {
      prev_est = est;
      est = epsilon_extrapolate(partial);
      const double d = std::fabs(est - prev_est);
      if (d <= 0.25 * cfg.target(est) && std::isfinite(est)) {
        if (++stable >= 2) return finish(est, std::max(d, 0.5 * cell_err), 0, cfg);
      } else {
        stable = 0;
      }
    }
    // pure-decay integrands: the raw sums converge on their own
    if (partial.size() >= 6 && std::fabs(p.integral) <= 0.01 * cfg.abs_tol) {
      est = epsilon_extrapolate(partial);
      return finish(est, std::max(std::fabs(est - run), cell_err), 0, cfg);
    }
  }
  est = epsilon_extrapolate(partial);
  QuadratureResult r;
  r.value = est;
  r.error_estimate = std::max(std::fabs(est - prev_est), cell_err);
  r.status = r.error_estimate <= cfg.target(est) ? QuadStatus::converged
                                                 : QuadStatus::max_depth_reached;
  return r;
}

QuadratureResult oscillatory_cells(const Integrand& f, double a, double omega,
                                   OscKind kind, const ToleranceConfig& cfg) {
  long evals = 0;
  try {
    const double half_period = M_PI / omega;
    // boundaries at trig zeros measured from the phase origin, not from a
    const double phase0 = (kind == OscKind::sine) ? 0.0 : 0.5 * half_period;
    int k0 = 0;
    while (phase0 + k0 * half_period <= a) ++k0;

    double head = 0.0, head_err = 0.0;
    const double first = phase0 + k0 * half_period;
    if (first > a) {
      QuadratureResult h = integrate_finite(f, a, first, cfg);
      if (h.status == QuadStatus::evaluation_fault) return fault_result(evals + h.evaluations);
      head = h.value;
      head_err = h.error_estimate;
      evals += h.evaluations;
    }
    auto boundary = [&](int k) { return phase0 + (k0 + k) * half_period; };
    QuadratureResult r = sum_cells(f, head, head_err, boundary, cfg.osc_max_periods, cfg, evals);
    r.evaluations = evals;
    return r;
  } catch (const FaultSignal&) {
    return fault_result(evals);
  }
}

}  // namespace

QuadratureResult integrate_oscillatory(const Integrand& f_env, double a, double omega,
                                       OscKind kind, const ToleranceConfig& cfg) {
  if (!(omega > 0.0)) return fault_result(0);
  Integrand full(
      [f_env, omega, kind](double x) {
        const double trig = (kind == OscKind::sine) ? std::sin(omega * x) : std::cos(omega * x);
        return f_env(x) * trig;
      });
  return oscillatory_cells(full, a, omega, kind, cfg);
}

// ---------------------------------------------------------------------------
// dispatch

namespace {

QuadratureResult chirp_inv_square(const Integrand& f, double coef, OscKind kind,
                                  const ToleranceConfig& cfg) {
  // Oscillation cos/sin(coef/x^2) with cells accumulating at x = 0.
  if (coef <= 0.0) return integrate_exp_sinh(f, 0.0, cfg);
  long evals = 0;
  try {
    const double outer =
        (kind == OscKind::cosine) ? std::sqrt(coef / (0.5 * M_PI)) : std::sqrt(coef / M_PI);
    QuadratureResult tail = integrate_exp_sinh(f, outer, cfg);
    if (tail.status == QuadStatus::evaluation_fault) return tail;
    evals += tail.evaluations;

    const double off = (kind == OscKind::cosine) ? 0.5 : 1.0;
    auto boundary = [&](int k) { return std::sqrt(coef / ((off + k) * M_PI)); };
    // cells [x_{k+1}, x_k], signs alternate because the trig factor
    // crosses zero at each boundary
    ToleranceConfig cell_cfg = cfg;
    std::vector<double> partial;
    double run = 0.0, cell_err = 0.0, est = 0.0, prev_est = kInf;
    int stable = 0;
    const int max_cells = 2 * cfg.osc_max_periods;
    QuadratureResult out;
    for (int k = 0; k < max_cells; ++k) {
      const double hi = boundary(k);
      const double lo = boundary(k + 1);
      QuadratureResult c = integrate_finite(f, lo, hi, cell_cfg);
      if (c.status == QuadStatus::evaluation_fault) return fault_result(evals + c.evaluations);
      evals += c.evaluations;
      run += c.value;
      cell_err += c.error_estimate;
      partial.push_back(run);
      if (partial.size() >= 5) {
        prev_est = est;
        est = epsilon_extrapolate(partial);
        const double d = std::fabs(est - prev_est);
        if (d <= 0.25 * cfg.target(tail.value + est)) {
          if (++stable >= 2) break;
        } else {
          stable = 0;
        }
      }
    }
    est = epsilon_extrapolate(partial);
    const double d = std::fabs(est - prev_est);
    out.value = tail.value + est;
    out.error_estimate = tail.error_estimate + std::max(d, 0.25 * cell_err);
    out.evaluations = evals;
    out.status = out.error_estimate <= cfg.target(out.value) ? QuadStatus::converged
                                                             : QuadStatus::max_depth_reached;
    return out;
  } catch (const FaultSignal&) {
    return fault_result(evals);
  }
}

QuadratureResult sqrt_rectified_exp_sinh(const Integrand& f, double a,
                                         const ToleranceConfig& cfg) {
  // x = a + s^2 turns an integrable singularity at a into a bounded
  // integrand on s in (0, inf)
  Integrand g([f, a](double s) { return 2.0 * s * f(a + s * s); });
  QuadratureResult r = integrate_exp_sinh(g, 0.0, cfg);
  return r;
}

QuadratureResult combine(QuadratureResult x, QuadratureResult y, const ToleranceConfig& cfg) {
  QuadratureResult r;
  r.evaluations = x.evaluations + y.evaluations;
  if (x.status == QuadStatus::evaluation_fault || y.status == QuadStatus::evaluation_fault) {
    r.value = std::numeric_limits<double>::quiet_NaN();
    r.error_estimate = kInf;
    r.status = QuadStatus::evaluation_fault;
    return r;
  }
  r.value = x.value + y.value;
  r.error_estimate = x.error_estimate + y.error_estimate;
  r.status = r.error_estimate <= cfg.target(r.value) ? QuadStatus::converged
                                                     : QuadStatus::max_depth_reached;
  return r;
}

}  // namespace

QuadratureResult integrate_auto(const Integrand& f, double lower, double upper,
                                const QuadHints& hints, const ToleranceConfig& cfg) {
  const bool lo_inf = std::isinf(lower) && lower < 0.0;
  const bool hi_inf = std::isinf(upper) && upper > 0.0;

  if (lo_inf && hi_inf) {
    QuadHints h = hints;
    QuadratureResult right = integrate_auto(f, 0.0, kInf, h, cfg);
    Integrand reflected([f](double x) { return f(-x); });
    QuadHints hr = hints;
    std::swap(hr.singular_lower, hr.singular_upper);
    QuadratureResult left = integrate_auto(reflected, 0.0, kInf, hr, cfg);
    return combine(right, left, cfg);
  }
  if (lo_inf) {
    Integrand reflected([f](double x) { return f(-x); });
    QuadHints hr = hints;
    std::swap(hr.singular_lower, hr.singular_upper);
    return integrate_auto(reflected, -upper, kInf, hr, cfg);
  }
  if (hi_inf) {
    if (hints.inv_square_phase && hints.inv_square_phase->coefficient > 0.0)
      return chirp_inv_square(f, hints.inv_square_phase->coefficient,
                              hints.inv_square_phase->kind, cfg);
    if (hints.oscillation && hints.oscillation->omega > 1e-12)
      return oscillatory_cells(f, lower, hints.oscillation->omega, hints.oscillation->kind,
                               cfg);
    if (hints.singular_lower) return sqrt_rectified_exp_sinh(f, lower, cfg);
    return integrate_exp_sinh(f, lower, cfg);
  }
  if (hints.singular_lower || hints.singular_upper)
    return integrate_tanh_sinh(f, lower, upper, cfg);
  return integrate_finite(f, lower, upper, cfg);
}

}  // namespace parmint
