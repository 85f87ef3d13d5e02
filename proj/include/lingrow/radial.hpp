#pragma once

// Radially symmetric solutions on the annulus r_in < |x| < r_out with
// u = 0 on the inner and u = M on the outer sphere. The first integral
// F'(U'(r)) r^{d-1} = c r_in^{d-1} gives
//   U(r) = int_{r_in}^r (F')^{-1}(c (r_in/s)^{d-1}) ds,
// and the supremum of U(r_out; c) over c < 1 is the largest attainable gap.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "lingrow/calculus.hpp"
#include "lingrow/error.hpp"
#include "lingrow/integrand.hpp"

namespace lingrow {

struct RadialProblem {
  Integrand I;
  int d = 2;
  double r_in = 1.0;
  double r_out = 2.0;
  double M = 0.0;

  void validate() const {
    if (!I.valid()) throw Error(Errc::InvalidParameter, "radial problem without integrand");
    if (d < 2) throw Error(Errc::InvalidParameter, "dimension must be at least 2");
    if (!(r_in > 0.0 && r_in < r_out)) throw Error(Errc::InvalidParameter, "need 0 < r_in < r_out");
  }
};

namespace detail {

/// Profile slope at r = r_in + sigma for flux parameter c, given 1 - c
/// separately so that c within round-off of 1 stays meaningful.
inline double radial_slope(const RadialProblem& P, double c, double one_minus_c, double sigma) {
  if (c == 0.0) return 0.0;
  const double log_q = -(P.d - 1) * std::log1p(sigma / P.r_in);
  const double w = one_minus_c - c * std::expm1(log_q);
  return P.I.inverse_dF(c * std::exp(log_q), w);
}

/// U(r_in + length) by quadrature in tau with sigma = tau^4, which tames the
/// endpoint singularity of the slope when c approaches 1.
inline double radial_height(const RadialProblem& P, double c, double one_minus_c, double length,
                            double rel_tol = 1e-12) {
  if (length <= 0.0 || c == 0.0) return 0.0;
  auto integrand = [&](double tau) {
    const double t2 = tau * tau;
    return radial_slope(P, c, one_minus_c, t2 * t2) * 4.0 * t2 * tau;
  };
  QuadratureOptions opt;
  opt.rel_tol = rel_tol;
  opt.max_subdivisions = 4000;
  return integrate(integrand, 0.0, std::sqrt(std::sqrt(length)), opt).value;
}

}  // namespace detail

/// A radial profile for one flux constant.
struct RadialSolution {
  RadialProblem problem;
  double c = 0.0;
  double one_minus_c = 1.0;
  /// U(r_out) of this profile (negated when the requested gap is negative).
  double M_attained = 0.0;
  double M_max = std::numeric_limits<double>::infinity();
  /// Integral of t F''(t) over [1, inf); infinite under the solvability criterion.
  double C0 = std::numeric_limits<double>::infinity();
  bool attainable = true;
  double sign = 1.0;

  /// U(r) for r in [r_in, r_out].
  double U(double r) const {
    return sign * detail::radial_height(problem, c, one_minus_c, r - problem.r_in);
  }

  /// U'(r) = (F')^{-1}(c (r_in/r)^{d-1}).
  double dU(double r) const {
    return sign * detail::radial_slope(problem, c, one_minus_c, r - problem.r_in);
  }

  /// F'(U'(r)) r^{d-1}; constant in r and equal to c r_in^{d-1}.
  double flux(double r) const {
    return problem.I.dF(std::abs(dU(r))) * std::pow(r, problem.d - 1);
  }
};

/// C0 = int_1^inf t F''(t) dt, or +inf when the criterion says it diverges.
inline double radial_C0(const Integrand& I, Verdict criterion) {
  if (criterion != Verdict::Converges) return std::numeric_limits<double>::infinity();
  QuadratureOptions opt;
  opt.rel_tol = 1e-12;
  opt.max_subdivisions = 4000;
  return integrate_log_tail([&I](double t) { return t * I.ddF(t); }, 1.0, opt).value;
}

inline Verdict radial_criterion(const Integrand& I) {
  return classify_divergence([&I](double t) { return t * I.ddF(t); }, 1.0, default_cutoffs()).verdict;
}

inline RadialSolution profile(const RadialProblem& P, double c) {
  P.validate();
  if (!(c >= 0.0 && c < 1.0)) throw Error(Errc::InvalidParameter, "flux constant must lie in [0, 1)");
  RadialSolution sol;
  sol.problem = P;
  sol.c = c;
  sol.one_minus_c = 1.0 - c;
  sol.M_attained = detail::radial_height(P, c, sol.one_minus_c, P.r_out - P.r_in);
  return sol;
}

struct GapOptions {
  /// Flux constants c_k = 1 - 2^{-k}, k = 1..max_level.
  int max_level = 40;
  /// First level entering the increment fit.
  int fit_from = 20;
  double ceiling = 1e6;
  /// Increments decaying like 2^{-k gamma} with gamma below this are
  /// treated as non-summable.
  double exponent_margin = 0.02;
};

struct GapReport {
  double M_max = std::numeric_limits<double>::infinity();
  /// Fitted decay exponent gamma of the increments U_{k+1} - U_k ~ 2^{-k gamma}.
  double increment_exponent = 0.0;
  Verdict criterion = Verdict::Inconclusive;
  std::vector<std::pair<double, double>> sweep;  // (c, U(r_out; c))

  bool finite() const { return std::isfinite(M_max); }
};

/// Supremum of U(r_out; c) over c in (0, 1). Infinite when the heights pass
/// the ceiling or their increments stop decaying; otherwise the limit is the
/// c = 1 profile integral, which has an integrable singularity at r_in.
inline GapReport max_gap_report(const RadialProblem& P, const GapOptions& opt = {}) {
  P.validate();
  GapReport rep;
  rep.criterion = radial_criterion(P.I);
  const double length = P.r_out - P.r_in;
  bool over_ceiling = false;
  for (int k = 1; k <= opt.max_level; ++k) {
    const double w = std::ldexp(1.0, -k);
    const double c = 1.0 - w;
    const double U = detail::radial_height(P, c, w, length);
    rep.sweep.emplace_back(c, U);
    if (U > opt.ceiling) {
      over_ceiling = true;
      break;
    }
  }

  bool infinite = over_ceiling;
  if (!over_ceiling) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int k = opt.fit_from; k < opt.max_level; ++k) {
      const double inc = rep.sweep[k].second - rep.sweep[k - 1].second;
      if (inc <= 0.0) continue;
      const double x = k * std::log(2.0), y = std::log(inc);
      sx += x; sy += y; sxx += x * x; sxy += x * y;
      ++m;
    }
    if (m >= 2) {
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      rep.increment_exponent = -slope;
    } else {
      rep.increment_exponent = std::numeric_limits<double>::infinity();
    }
    infinite = rep.increment_exponent <= opt.exponent_margin;
  }

  if (!infinite) {
    double limit = std::numeric_limits<double>::quiet_NaN();
    try {
      limit = detail::radial_height(P, 1.0, 0.0, length, 1e-11);
    } catch (const Error&) {
      // Aitken extrapolation of the last three heights as a fallback.
      const auto n = rep.sweep.size();
      const double u0 = rep.sweep[n - 3].second, u1 = rep.sweep[n - 2].second, u2 = rep.sweep[n - 1].second;
      const double denom = (u2 - u1) - (u1 - u0);
      limit = denom != 0.0 ? u2 - (u2 - u1) * (u2 - u1) / denom : u2;
    }
    rep.M_max = std::max(limit, rep.sweep.back().second);
  }

  const bool finite = std::isfinite(rep.M_max);
  if ((finite && rep.criterion == Verdict::Diverges) || (!finite && rep.criterion == Verdict::Converges)) {
    throw Error(Errc::InconsistentWithCriterion,
                "radial gap is " + std::string(finite ? "finite" : "infinite") + " but the criterion says " +
                    to_string(rep.criterion));
  }
  return rep;
}

inline double max_gap(const RadialProblem& P, const GapOptions& opt = {}) { return max_gap_report(P, opt).M_max; }

/// Finds the flux constant with U(r_out; c) = M, or reports the gap as
/// unattainable (attainable = false, M_max set) when M >= M_max.
inline RadialSolution solve_radial(const RadialProblem& P, double tol = 1e-10, const GapOptions& gopt = {}) {
  P.validate();
  if (!(tol > 0.0)) throw Error(Errc::InvalidParameter, "tolerance must be positive");
  const GapReport gap = max_gap_report(P, gopt);
  const Verdict criterion = gap.criterion;

  RadialSolution sol;
  sol.problem = P;
  sol.M_max = gap.M_max;
  sol.C0 = radial_C0(P.I, criterion);
  sol.sign = P.M < 0.0 ? -1.0 : 1.0;
  const double target = std::abs(P.M);
  if (target == 0.0) {
    sol.c = 0.0;
    sol.one_minus_c = 1.0;
    sol.M_attained = 0.0;
    return sol;
  }
  if (target >= gap.M_max) {
    sol.attainable = false;
    sol.c = 1.0;
    sol.one_minus_c = 0.0;
    sol.M_attained = sol.sign * gap.M_max;
    return sol;
  }

  // Bisection in log(theta), theta = c / (1 - c); U(r_out; .) is increasing.
  const double length = P.r_out - P.r_in;
  auto height = [&](double log_theta) {
    const double theta = std::exp(log_theta);
    const double one_minus_c = 1.0 / (1.0 + theta);
    const double c = theta / (1.0 + theta);
    return detail::radial_height(P, c, one_minus_c, length);
  };
  double lo = std::log(1e-12), hi = std::log(1e12);
  while (height(lo) > target) {
    lo -= 20.0;
    if (lo < -690.0) break;
  }
  while (height(hi) < target) {
    hi += 20.0;
    if (hi > 690.0) throw Error(Errc::NotFound, "gap not reached before c rounds to 1");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double U = height(mid);
    if (std::abs(U - target) <= tol) break;
    if (U < target) lo = mid; else hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  const double theta = std::exp(mid);
  sol.c = theta / (1.0 + theta);
  sol.one_minus_c = 1.0 / (1.0 + theta);
  sol.M_attained = sol.sign * detail::radial_height(P, sol.c, sol.one_minus_c, length);
  return sol;
}

struct PaperBound {
  double value = 0.0;
  double C0 = 0.0;
  double dF_at_1 = 0.0;
  /// The bound is stated for r_in = 1, r_out = 2.
  bool exact_geometry = false;
};

/// U(r) <= (2^d / (d-1)) (1 + C0 / F'(1)) when the criterion fails.
inline PaperBound paper_bound(const RadialProblem& P) {
  P.validate();
  const Verdict criterion = radial_criterion(P.I);
  if (criterion != Verdict::Converges) {
    throw Error(Errc::CriterionDiverges, "C0 is infinite, the bound is vacuous");
  }
  PaperBound b;
  b.C0 = radial_C0(P.I, criterion);
  b.dF_at_1 = P.I.dF(1.0);
  b.value = std::ldexp(1.0, P.d) / (P.d - 1) * (1.0 + b.C0 / b.dF_at_1);
  b.exact_geometry = P.r_in == 1.0 && P.r_out == 2.0;
  return b;
}

}  // namespace lingrow
