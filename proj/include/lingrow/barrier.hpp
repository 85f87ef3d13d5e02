#pragma once

// Barrier machinery for the boundary gradient estimate: the weight g that
// weakens F while keeping the solvability criterion, the profile b of the
// radial solution for F_g outside a ball, the prototype barrier omega, its
// affine correction v, and the constants M, delta_max and delta.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lingrow/calculus.hpp"
#include "lingrow/error.hpp"
#include "lingrow/integrand.hpp"

namespace lingrow {

/// The base integrand F together with F_g, where F_g'' = F'' g and
///   g = g~ / A,  g~(s) = 1 / (1 + int_0^s t F''(t) dt),  A = int_0^inf F'' g~.
struct WeightedIntegrand {
  Integrand base;
  Integrand Fg;
  double A = 1.0;

  double g_tilde(double s) const { return 1.0 / (1.0 + base.moment(s)); }
  double g(double s) const { return g_tilde(s) / A; }
  double ag(double s) const { return Fg.a(s); }
  double dag(double s) const { return Fg.da(s); }
};

inline WeightedIntegrand build_weight(const Integrand& I) {
  if (!I.valid()) throw Error(Errc::InvalidParameter, "weight needs an integrand");
  WeightedIntegrand W;
  W.base = I;
  W.Fg = make_custom([I](double t) { return I.ddF(t) / (1.0 + I.moment(t)); }, I.far_grid_max(),
                     "weighted{" + I.label() + "}");
  const auto* model = dynamic_cast<const detail::CustomModel*>(W.Fg.model().get());
  W.A = model->unnormalized_mass();
  return W;
}

struct BarrierParams {
  double r0 = 1.0;
  double delta = 0.1;
  std::vector<double> k;  // empty means the zero vector
  double c_affine = 0.0;
  double K = 1.0;
  double M = 0.0;
  double delta_max = 0.5;
  double r_max = std::numeric_limits<double>::infinity();
  int d = 2;

  void validate() const {
    if (d < 2) throw Error(Errc::InvalidParameter, "dimension must be at least 2");
    if (!(r0 > 0.0)) throw Error(Errc::InvalidParameter, "r0 must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw Error(Errc::InvalidParameter, "delta must lie in (0, 1)");
    if (!k.empty() && static_cast<int>(k.size()) != d) {
      throw Error(Errc::InvalidParameter, "k must have d components");
    }
  }
};

struct BarrierEval {
  double r = 0.0;
  double b = 0.0;
  double db = 0.0;
  double omega = 0.0;
  double v = 0.0;
  std::vector<double> grad_v;
  double L_residual = 0.0;
  double Ltilde1 = 0.0;
  double Ltilde2 = 0.0;
  double laplacian_omega = 0.0;
};

namespace detail {

/// log((1-delta) r0 / r) for r = r0 + sigma.
inline double barrier_log_ratio(const BarrierParams& P, double sigma) {
  return std::log1p(-P.delta) - std::log1p(sigma / P.r0);
}

}  // namespace detail

/// b(r0 + sigma) = (F_g')^{-1}(((1-delta) r0 / r)^{d-1}), with the offset
/// sigma passed separately so that points very close to r0 keep precision.
inline double profile_b_offset(const WeightedIntegrand& W, const BarrierParams& P, double sigma) {
  if (sigma < 0.0) throw Error(Errc::InvalidParameter, "profile evaluated inside the ball");
  const double e = (P.d - 1) * detail::barrier_log_ratio(P, sigma);
  return W.Fg.inverse_dF(std::exp(e), -std::expm1(e));
}

inline double profile_b(const WeightedIntegrand& W, const BarrierParams& P, double r) {
  return profile_b_offset(W, P, r - P.r0);
}

/// b'(r) from implicit differentiation of F_g'(b(r)) r^{d-1} = const.
inline double profile_db_offset(const WeightedIntegrand& W, const BarrierParams& P, double sigma, double b) {
  const double r = P.r0 + sigma;
  const double y = std::exp((P.d - 1) * detail::barrier_log_ratio(P, sigma));
  return -(P.d - 1) * y / (r * W.Fg.ddF(b));
}

/// omega at radius r0 + sigma: the integral of b over [r0, r0 + sigma], taken
/// in tau = log(delta r0 + s) because b peaks sharply at r0 when delta is small.
inline double omega_offset(const WeightedIntegrand& W, const BarrierParams& P, double sigma,
                           double rel_tol = 1e-11) {
  if (sigma <= 0.0) return 0.0;
  const double shift = P.delta * P.r0;
  auto integrand = [&](double tau) {
    const double e = std::exp(tau);
    const double s = std::max(0.0, e - shift);
    return profile_b_offset(W, P, s) * e;
  };
  QuadratureOptions opt;
  opt.rel_tol = rel_tol;
  opt.max_subdivisions = 4000;
  return integrate(integrand, std::log(shift), std::log(shift + sigma), opt).value;
}

inline double norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double omega(const WeightedIntegrand& W, const BarrierParams& P, const std::vector<double>& x) {
  const double r = norm(x);
  if (r < P.r0) throw Error(Errc::InvalidParameter, "omega is defined outside the ball only");
  return omega_offset(W, P, r - P.r0);
}

/// Evaluates the barrier at x = (r0 + sigma) * unit. The divergence
/// expression is assembled as L = L~1 + L~2 with
///   L~1 = (a'(|Dv|)/|Dv|) b' (r - b/b') (|k|^2/r - (k.x)^2/r^3),
///   L~2 = -a(|Dv|) b' (|Dv| F''(|Dv|)/F'(|Dv|) - b F_g''(b)/F_g'(b)).
inline BarrierEval eval_barrier_offset(const WeightedIntegrand& W, const BarrierParams& P, double sigma,
                                       const std::vector<double>& unit, bool with_omega = true) {
  P.validate();
  if (static_cast<int>(unit.size()) != P.d) throw Error(Errc::InvalidParameter, "point must have d components");
  if (!(sigma > 0.0)) throw Error(Errc::InvalidParameter, "barrier evaluated on or inside the ball");
  const int d = P.d;
  BarrierEval e;
  e.r = P.r0 + sigma;
  std::vector<double> x(d), k(d, 0.0);
  for (int i = 0; i < d; ++i) x[i] = e.r * unit[i];
  if (!P.k.empty()) k = P.k;

  e.b = profile_b_offset(W, P, sigma);
  e.db = profile_db_offset(W, P, sigma, e.b);
  e.omega = with_omega ? omega_offset(W, P, sigma) : std::numeric_limits<double>::quiet_NaN();

  double kx = 0.0, kk = 0.0;
  for (int i = 0; i < d; ++i) {
    kx += k[i] * x[i];
    kk += k[i] * k[i];
  }
  e.v = e.omega + kx + P.c_affine;
  e.grad_v.resize(d);
  for (int i = 0; i < d; ++i) e.grad_v[i] = e.b * unit[i] + k[i];
  const double s = norm(e.grad_v);
  if (s < 1e-12) throw Error(Errc::DegenerateGradient, "|grad v| vanishes");

  // |k|^2 |x|^2 - (k.x)^2 as a sum of squares keeps the sign exact.
  double cross = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double t = k[i] * x[j] - k[j] * x[i];
      cross += t * t;
    }
  }
  const double r = e.r;
  const double angular = cross / (r * r * r);
  e.Ltilde1 = angular == 0.0 ? 0.0 : (W.base.da(s) / s) * e.db * (r - e.b / e.db) * angular;

  const double ratio_v = s * W.base.ddF(s) / W.base.dF(s);
  const double ratio_b = e.b * W.Fg.ddF(e.b) / W.Fg.dF(e.b);
  e.Ltilde2 = -W.base.a(s) * e.db * (ratio_v - ratio_b);
  e.L_residual = e.Ltilde1 + e.Ltilde2;
  e.laplacian_omega = e.db + (d - 1) * e.b / r;
  return e;
}

inline BarrierEval eval_barrier(const WeightedIntegrand& W, const BarrierParams& P, const std::vector<double>& x,
                                bool with_omega = true) {
  const double r = norm(x);
  if (!(r > P.r0)) throw Error(Errc::InvalidParameter, "barrier evaluated on or inside the ball");
  std::vector<double> unit(x);
  for (double& v : unit) v /= r;
  return eval_barrier_offset(W, P, r - P.r0, unit, with_omega);
}

enum class MCondition { SlopeBound, Concavity, WeightDecay };

inline std::string_view to_string(MCondition c) {
  switch (c) {
    case MCondition::SlopeBound: return "slope_bound";
    case MCondition::Concavity: return "concavity";
    case MCondition::WeightDecay: return "weight_decay";
  }
  return "unknown";
}

struct MSelection {
  double M = 0.0;
  double M1 = 0.0;
  double M2 = 0.0;
  double M3 = 0.0;
  /// Smallest grid s with s^2 a'(s) <= -1/2 for F and for F_g.
  double s_a = 0.0;
  double s_g = 0.0;
  double C2 = 0.0;
  MCondition binding = MCondition::SlopeBound;
};

struct MSearchOptions {
  int per_decade = 64;
  double grid_min = 1e-3;
  double grid_max = 1e12;
  /// Oscillation constant of F''; computed from the hypothesis check when unset.
  std::optional<double> C2;
};

namespace detail {

/// Smallest grid value from which pred holds at every larger grid point.
template <class Pred>
double first_persistent(const std::vector<double>& grid, Pred pred, const char* what) {
  std::size_t start = grid.size();
  for (std::size_t i = grid.size(); i-- > 0;) {
    if (!pred(grid[i])) break;
    start = i;
  }
  if (start == grid.size()) throw Error(Errc::NotFound, std::string(what) + " fails up to the grid end");
  return grid[start];
}

}  // namespace detail

/// M = max(M1, M2, M3): M1 = 2K bounds |Dv| between b/2 and 2b; M2 makes
/// s^2 a'(s) <= -1/2 at s = |Dv| >= b/2 and s^2 a_g'(s) <= -1/2 at s = b;
/// M3 makes 2 C2 g(M) <= 1.
inline MSelection select_M(const WeightedIntegrand& W, double K, const MSearchOptions& opt = {}) {
  if (!(K >= 0.0)) throw Error(Errc::InvalidParameter, "K must be nonnegative");
  const auto grid = geometric_nodes(opt.grid_min, opt.grid_max, opt.per_decade);
  MSelection sel;
  sel.C2 = opt.C2 ? *opt.C2 : check_hypotheses(W.base).C2_oscillation;
  sel.M1 = 2.0 * K;
  sel.s_a = detail::first_persistent(grid, [&](double s) { return W.base.s2_da(s) <= -0.5; }, "s^2 a'(s) <= -1/2");
  sel.s_g = detail::first_persistent(grid, [&](double s) { return W.Fg.s2_da(s) <= -0.5; },
                                     "s^2 a_g'(s) <= -1/2");
  sel.M2 = std::max({sel.M1, 2.0 * sel.s_a, sel.s_g});
  sel.M3 = detail::first_persistent(grid, [&](double s) { return 2.0 * sel.C2 * W.g(s) <= 1.0; }, "2 C2 g(M) <= 1");
  sel.M = std::max(sel.M2, sel.M3);
  if (sel.M == sel.M3 && sel.M3 > sel.M2) {
    sel.binding = MCondition::WeightDecay;
  } else if (sel.M == sel.M1) {
    sel.binding = MCondition::SlopeBound;
  } else {
    sel.binding = MCondition::Concavity;
  }
  return sel;
}

struct DeltaMax {
  double delta_max = 0.0;
  double r_max = 0.0;
  double threshold = 0.0;
};

/// Largest delta_max with (F_g')^{-1}(s) >= T on [(1 - 2 delta_max)^{d-1}, 1),
/// T = max(M, Mstar_u0), i.e. (1 - 2 delta_max)^{d-1} = F_g'(T).
inline DeltaMax select_delta_max(const WeightedIntegrand& W, int d, double M, double Mstar_u0) {
  if (d < 2) throw Error(Errc::InvalidParameter, "dimension must be at least 2");
  DeltaMax out;
  out.threshold = std::max(M, Mstar_u0);
  const double w = W.Fg.tail(out.threshold);
  out.delta_max = -0.5 * std::expm1(std::log1p(-w) / (d - 1));
  out.r_max = (1.0 - out.delta_max) / (1.0 - 2.0 * out.delta_max);
  return out;
}

inline DeltaMax select_delta_max(const WeightedIntegrand& W, const BarrierParams& P, double M, double Mstar_u0) {
  DeltaMax out = select_delta_max(W, P.d, M, Mstar_u0);
  out.r_max *= P.r0;
  return out;
}

struct DeltaSelection {
  double delta = 0.0;
  int halvings = 0;
  double achieved = 0.0;
  /// alpha = min(r0/(d-1), 1 - (r0/(r0+eta))^{d-1}) of the lower-bound estimate.
  double alpha = 0.0;
};

/// Integral of b over [r0, r0 + eta].
inline double barrier_height(const WeightedIntegrand& W, const BarrierParams& P, double eta) {
  return omega_offset(W, P, eta);
}

/// The lower bound alpha * int_{(F_g')^{-1}(1-alpha)}^{b(r0)} t F_g''(t) dt.
inline double barrier_height_lower_bound(const WeightedIntegrand& W, const BarrierParams& P, double eta) {
  const double alpha = std::min(P.r0 / (P.d - 1), -std::expm1((P.d - 1) * -std::log1p(eta / P.r0)));
  const double lo = W.Fg.inverse_dF(1.0 - alpha, alpha);
  const double hi = profile_b_offset(W, P, 0.0);
  return alpha * (W.Fg.moment(hi) - W.Fg.moment(lo));
}

struct HeightSearchOptions {
  /// delta is never taken below this, keeping b(r0) finite in double precision.
  double delta_floor = 1e-300;
};

namespace detail {

/// Smallest delta whose profile value b(r0) stays where F_g'' is a normal
/// double; below it the tail of F_g is no longer resolvable.
inline double representable_delta(const WeightedIntegrand& W, int d) {
  double s_top = 1e300;
  while (s_top > 1.0 && !(W.Fg.ddF(s_top) >= std::numeric_limits<double>::min())) s_top /= 10.0;
  const double w = W.Fg.tail(s_top);
  return -std::expm1(std::log1p(-w) / (d - 1));
}

}  // namespace detail

/// Smallest j with int_{r0}^{r0+eta} b dr >= target for delta = delta_max / 2^j.
/// The integral increases as delta decreases, so an exponential search
/// followed by bisection over j gives the same j as a linear scan.
inline DeltaSelection select_delta_for_height(const WeightedIntegrand& W, const BarrierParams& P, double eta,
                                              double target, const HeightSearchOptions& opt = {}) {
  if (!(eta > 0.0)) throw Error(Errc::InvalidParameter, "eta must be positive");
  if (!(P.delta_max > 0.0 && P.delta_max < 0.5)) throw Error(Errc::InvalidParameter, "delta_max must lie in (0, 1/2)");
  DeltaSelection sel;
  sel.alpha = std::min(P.r0 / (P.d - 1), -std::expm1((P.d - 1) * -std::log1p(eta / P.r0)));
  const double floor = std::max(opt.delta_floor, detail::representable_delta(W, P.d));
  const int j_max = std::max(0, static_cast<int>(std::floor(std::log2(P.delta_max / floor))));
  auto height = [&](int j) {
    BarrierParams Q = P;
    Q.delta = std::ldexp(P.delta_max, -j);
    return barrier_height(W, Q, eta);
  };
  auto accept = [&](int j, double h) {
    sel.delta = std::ldexp(P.delta_max, -j);
    sel.halvings = j;
    sel.achieved = h;
    return sel;
  };
  double h0 = height(0);
  if (h0 >= target) return accept(0, h0);
  if (j_max == 0) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "height %.6g below target %.6g and delta_max is already at the floor", h0, target);
    throw Error(Errc::BudgetExhausted, msg);
  }
  int lo = 0, hi = 1;
  double h_hi = height(hi);
  while (h_hi < target) {
    lo = hi;
    if (hi == j_max) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "height %.6g below target %.6g at the smallest representable delta %.3g", h_hi,
                    target, std::ldexp(P.delta_max, -hi));
      throw Error(Errc::BudgetExhausted, msg);
    }
    hi = std::min(2 * hi, j_max);
    h_hi = height(hi);
  }
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    const double h = height(mid);
    if (h >= target) {
      hi = mid;
      h_hi = h;
    } else {
      lo = mid;
    }
  }
  return accept(hi, h_hi);
}

/// Exterior-ball data of the built-in domains: r0 of the touching ball,
/// M* with M* (|x| - r0) >= |x - x0|^2 on the boundary (ball centred at 0),
/// eta for the height condition, and the diameter.
struct ExteriorBallGeometry {
  std::string kind;
  double r0 = 0.0;
  double Mstar = 0.0;
  double eta = 0.0;
  double diameter = 0.0;

  /// C*(Omega) ||u0||_{1,inf} + ||u0||_inf with C* the diameter.
  double height_target(double u0_norm_1inf, double u0_norm_inf) const {
    return diameter * u0_norm_1inf + u0_norm_inf;
  }
};

inline ExteriorBallGeometry disk_geometry(double R) {
  if (!(R > 0.0)) throw Error(Errc::InvalidParameter, "disk radius must be positive");
  // On the circle, (|x-c| - r0) / |x - x0|^2 is smallest at the antipode,
  // giving M* = 2R for every r0.
  return {"disk", R, 2.0 * R, 0.5 * R, 2.0 * R};
}

namespace detail {

// sup over the circle |x| = rho of |x - x0|^2 / (|x - c| - r0), with x0 and c
// on the positive axis; the quotient is even in the angle, so [0, pi] suffices.
inline double circle_quotient_sup(double rho, double x0, double c, double r0) {
  auto q = [&](double th) {
    const double num = rho * rho + x0 * x0 - 2.0 * rho * x0 * std::cos(th);
    const double den = std::sqrt(rho * rho + c * c - 2.0 * rho * c * std::cos(th)) - r0;
    return den > 0.0 ? num / den : 0.0;
  };
  const int n = 2048;
  int best = 1;
  for (int i = 1; i <= n; ++i)
    if (q(M_PI * i / n) > q(M_PI * best / n)) best = i;
  double lo = M_PI * (best - 1) / n, hi = M_PI * std::min(best + 1, n) / n;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (q(a) > q(b)) hi = b; else lo = a;
  }
  return std::max({q(lo), q(hi), q(M_PI * best / n)});
}

}  // namespace detail

inline ExteriorBallGeometry annulus_geometry(double r_in, double r_out) {
  if (!(r_in > 0.0 && r_in < r_out)) throw Error(Errc::InvalidParameter, "need 0 < r_in < r_out");
  // Inside the hole a ball of radius r_in/2 touches the inner circle; outside,
  // a ball of the same radius touches the outer one. M* is the largest
  // quotient over both circles for both touching points, with a small margin.
  const double r0 = 0.5 * r_in;
  double m = 0.0;
  for (double rho : {r_in, r_out}) {
    m = std::max(m, detail::circle_quotient_sup(rho, r_in, r_in - r0, r0));
    m = std::max(m, detail::circle_quotient_sup(rho, r_out, r_out + r0, r0));
  }
  return {"annulus", r0, m * (1.0 + 1e-9), 0.5 * r0, 2.0 * r_out};
}

inline ExteriorBallGeometry polygon_geometry(double diameter, double r0_cap) {
  if (!(diameter > 0.0 && r0_cap > 0.0)) throw Error(Errc::InvalidParameter, "polygon data must be positive");
  // A convex polygon admits exterior balls of any radius; |x - c| + r0
  // bounds the quotient and is at most diam + 2 r0.
  return {"convex_polygon", r0_cap, diameter + 2.0 * r0_cap, 0.5 * r0_cap, diameter};
}

/// b(r0) + ||u0||_{1,inf}: the slope bound of the barrier at the touching point.
inline double normal_derivative_bound(const WeightedIntegrand& W, const BarrierParams& P, double u0_norm_1inf) {
  return profile_b_offset(W, P, 0.0) + u0_norm_1inf;
}

struct CertificationOptions {
  int samples = 10000;
  std::uint64_t seed = 1;
  /// Radii are drawn as r0 + sigma_M u with log10 u uniform in [-decades, 0].
  double offset_decades = 9.0;
};

struct CertificationReport {
  int samples = 0;
  int in_region = 0;
  double min_L_residual = std::numeric_limits<double>::infinity();
  double min_Ltilde1 = std::numeric_limits<double>::infinity();
  double min_Ltilde2 = std::numeric_limits<double>::infinity();
  double max_laplacian_omega = -std::numeric_limits<double>::infinity();
  double max_flux_deviation = 0.0;
};

/// Samples points with b(|x|) >= M: delta log-uniform in [delta_lo, delta_max],
/// radii inside the region, random directions, |k| <= K uniformly in the ball.
inline CertificationReport certify_barrier(const WeightedIntegrand& W, const BarrierParams& base, double delta_lo,
                                           const CertificationOptions& opt = {}) {
  base.validate();
  if (!(delta_lo > 0.0 && delta_lo <= base.delta_max)) {
    throw Error(Errc::InvalidParameter, "delta range must lie in (0, delta_max]");
  }
  const int d = base.d;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&]() {
    std::vector<double> u(d);
    double n = 0.0;
    do {
      for (double& v : u) v = gauss(rng);
      n = norm(u);
    } while (n < 1e-12);
    for (double& v : u) v /= n;
    return u;
  };

  const double w_M = W.Fg.tail(base.M);
  const double log_lo = std::log(delta_lo), log_hi = std::log(base.delta_max);
  CertificationReport rep;
  rep.samples = opt.samples;
  for (int n = 0; n < opt.samples; ++n) {
    BarrierParams P = base;
    P.delta = std::exp(log_lo + (log_hi - log_lo) * unif(rng));
    // b(r0 + sigma) >= M  <=>  (d-1) (log1p(sigma/r0) - log1p(-delta)) <= -log1p(-w_M).
    const double sigma_M = P.r0 * std::expm1(-std::log1p(-w_M) / (d - 1) + std::log1p(-P.delta));
    const std::vector<double> dir = random_unit();
    const double k_radius = base.K * std::pow(unif(rng), 1.0 / d);
    const std::vector<double> kdir = random_unit();
    P.k.assign(d, 0.0);
    for (int i = 0; i < d; ++i) P.k[i] = k_radius * kdir[i];
    if (!(sigma_M > 0.0)) continue;
    const double sigma = sigma_M * std::pow(10.0, -opt.offset_decades * unif(rng));
    const BarrierEval e = eval_barrier_offset(W, P, sigma, dir, false);
    if (!(e.b >= base.M)) continue;
    ++rep.in_region;
    rep.min_L_residual = std::min(rep.min_L_residual, e.L_residual);
    rep.min_Ltilde1 = std::min(rep.min_Ltilde1, e.Ltilde1);
    rep.min_Ltilde2 = std::min(rep.min_Ltilde2, e.Ltilde2);
    rep.max_laplacian_omega = std::max(rep.max_laplacian_omega, e.laplacian_omega);
    const double flux = W.Fg.dF(e.b) * std::pow(e.r, d - 1);
    const double expected = std::exp((d - 1) * (std::log1p(-P.delta) + std::log(P.r0)));
    rep.max_flux_deviation = std::max(rep.max_flux_deviation, std::abs(flux - expected));
  }
  return rep;
}

/// Largest |F_g'(b(r)) r^{d-1} - ((1-delta) r0)^{d-1}| over a geometric grid of r in [r0, r_hi].
inline double flux_deviation(const WeightedIntegrand& W, const BarrierParams& P, double r_hi, int points = 200) {
  const double expected = std::exp((P.d - 1) * (std::log1p(-P.delta) + std::log(P.r0)));
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double sigma = i == 0 ? 0.0 : (r_hi - P.r0) * std::pow(1e-12, 1.0 - static_cast<double>(i) / (points - 1));
    const double b = profile_b_offset(W, P, sigma);
    const double flux = W.Fg.dF(b) * std::pow(P.r0 + sigma, P.d - 1);
    worst = std::max(worst, std::abs(flux - expected));
  }
  return worst;
}

}  // namespace lingrow
