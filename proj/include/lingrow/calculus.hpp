#pragma once

// Shared numerical kernel: adaptive Gauss-Kronrod quadrature on finite and
// semi-infinite intervals, tabulated antiderivatives, tail-exponent based
// divergence classification and inversion of monotone functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "lingrow/error.hpp"

namespace lingrow {

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  int subdivisions = 1;
  bool converged = true;
};

struct QuadratureOptions {
  double rel_tol = 1e-10;
  double abs_floor = 0.0;
  int max_subdivisions = 2000;
  /// When false, an exhausted budget returns the best estimate flagged
  /// `converged = false` instead of raising ToleranceNotMet.
  bool throw_on_budget = true;
};

namespace detail {

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss rule.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;
  double resabs = 0.0;
};

inline double checked(double v) {
  if (!std::isfinite(v)) {
    throw Error(Errc::NonFiniteEvaluation, "integrand returned a non-finite value");
  }
  return v;
}

template <class Fn>
Panel gk15(Fn& f, double a, double b) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = checked(f(center));
  double resk = fc * kWgk[7];
  double resg = fc * kWg[3];
  double resabs = std::abs(resk);
  std::array<double, 7> f1{};
  std::array<double, 7> f2{};
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = checked(f(center - dx));
    f2[j] = checked(f(center + dx));
    const double sum = f1[j] + f2[j];
    resk += kWgk[j] * sum;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * sum;
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - mean);
  for (int j = 0; j < 7; ++j) {
    resasc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  const double ah = std::abs(half);
  resasc *= ah;
  resabs *= ah;
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps)) {
    err = std::max(50.0 * kEps * resabs, err);
  }
  return {a, b, resk * half, err, resabs};
}

struct PanelOrder {
  bool operator()(const Panel& x, const Panel& y) const {
    if (x.error != y.error) return x.error < y.error;
    return x.a > y.a;
  }
};

template <class Fn>
QuadratureResult integrate_finite(Fn& f, double lo, double hi, const QuadratureOptions& opt) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  if (lo == hi) return {0.0, 0.0, 1, true};
  std::priority_queue<Panel, std::vector<Panel>, PanelOrder> open;
  std::vector<Panel> frozen;
  open.push(gk15(f, lo, hi));
  int subdivisions = 1;

  auto totals = [&]() {
    // Summed in a fixed order so that results are reproducible bit for bit.
    std::vector<Panel> all = frozen;
    auto copy = open;
    while (!copy.empty()) {
      all.push_back(copy.top());
      copy.pop();
    }
    std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    double value = 0.0, error = 0.0, resabs = 0.0;
    for (const auto& p : all) {
      value += p.value;
      error += p.error;
      resabs += p.resabs;
    }
    return std::array<double, 3>{value, error, resabs};
  };

  double value = 0.0, error = 0.0, resabs = 0.0;
  double frozen_err = 0.0;
  double open_err = open.top().error;
  double running_value = open.top().value;
  bool converged = false;
  while (true) {
    const double target = std::max({opt.rel_tol * std::abs(running_value), opt.abs_floor});
    if (open_err + frozen_err <= target || open.empty()) {
      converged = true;
      break;
    }
    if (subdivisions >= opt.max_subdivisions) break;
    Panel worst = open.top();
    open.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b) ||
        worst.error <= 50.0 * kEps * worst.resabs) {
      frozen.push_back(worst);
      frozen_err += worst.error;
      open_err -= worst.error;
      // A frozen panel cannot be improved; if only frozen panels remain
      // the estimate is as good as floating point allows.
      if (open.empty()) {
        converged = true;
        break;
      }
      continue;
    }
    Panel left = gk15(f, worst.a, mid);
    Panel right = gk15(f, mid, worst.b);
    running_value += left.value + right.value - worst.value;
    open_err += left.error + right.error - worst.error;
    open.push(left);
    open.push(right);
    ++subdivisions;
    if (open_err < 0.0) open_err = 0.0;
  }
  auto t = totals();
  value = t[0];
  error = t[1];
  resabs = t[2];
  if (!converged) {
    // Accept estimates already at the round-off floor.
    if (error <= std::max({opt.rel_tol * std::abs(value), opt.abs_floor, 50.0 * kEps * resabs})) {
      converged = true;
    }
  }
  return {value, error, subdivisions, converged};
}

}  // namespace detail

/// Adaptive 15-point Gauss-Kronrod quadrature with interval bisection.
/// Finite intervals fall back to an endpoint-smoothing substitution when the
/// plain rule fails. `hi` may be +infinity; the tail is mapped onto (0,1) by
/// t = lo + S*u/(1-u) with S = max(1, |lo|).
template <class Fn>
QuadratureResult integrate(Fn&& f, double lo, double hi, const QuadratureOptions& opt = {}) {
  if (!(opt.rel_tol > 0.0)) throw Error(Errc::InvalidParameter, "rel_tol must be positive");
  if (std::isnan(lo) || std::isnan(hi)) throw Error(Errc::InvalidParameter, "NaN bound");
  if (hi < lo) {
    auto r = integrate(f, hi, lo, opt);
    r.value = -r.value;
    return r;
  }
  QuadratureResult result;
  if (std::isinf(hi)) {
    if (std::isinf(lo)) throw Error(Errc::InvalidParameter, "lower bound must be finite");
    const double scale = std::max(1.0, std::abs(lo));
    auto mapped = [&](double u) {
      const double w = 1.0 - u;
      if (w <= 0.0) return 0.0;
      const double t = lo + scale * u / w;
      if (!std::isfinite(t)) return 0.0;
      const double jac = scale / (w * w);
      const double v = f(t);
      if (v == 0.0) return 0.0;
      return v * jac;
    };
    result = detail::integrate_finite(mapped, 0.0, 1.0, opt);
  } else {
    // An integrable endpoint singularity either stalls bisection or gets
    // evaluated at the endpoint itself; the retry maps t = lo + L u^2 (3 - 2u),
    // whose Jacobian vanishes at both ends.
    bool retry = false;
    try {
      result = detail::integrate_finite(f, lo, hi, opt);
      retry = !result.converged;
    } catch (const Error& e) {
      if (e.code() != Errc::NonFiniteEvaluation) throw;
      retry = true;
    }
    if (retry) {
      const double len = hi - lo;
      auto smoothed = [&](double u) {
        const double t = lo + len * u * u * (3.0 - 2.0 * u);
        if (t <= lo || t >= hi) return 0.0;
        const double jac = 6.0 * len * u * (1.0 - u);
        return f(t) * jac;
      };
      result = detail::integrate_finite(smoothed, 0.0, 1.0, opt);
    }
  }
  if (!result.converged && opt.throw_on_budget) {
    throw Error(Errc::ToleranceNotMet, "subdivision budget exhausted");
  }
  return result;
}

/// Integral of f over [a, inf) for a > 0 in the variable u = log t, where
/// algebraic tails decay exponentially.
template <class Fn>
QuadratureResult integrate_log_tail(Fn&& f, double a, const QuadratureOptions& opt = {}) {
  if (!(a > 0.0)) throw Error(Errc::InvalidParameter, "log tail needs a positive lower bound");
  auto g = [&](double u) {
    const double t = std::exp(u);
    if (!std::isfinite(t)) return 0.0;
    const double v = f(t);
    return v == 0.0 ? 0.0 : v * t;
  };
  return integrate(g, std::log(a), INFINITY, opt);
}

/// Geometric node grid `{0, first, ..., last}` with `per_decade` nodes per decade.
inline std::vector<double> geometric_nodes(double first, double last, int per_decade,
                                           bool with_zero = true) {
  std::vector<double> nodes;
  if (with_zero) nodes.push_back(0.0);
  const double l0 = std::log10(first);
  const int count = static_cast<int>(std::ceil((std::log10(last) - l0) * per_decade));
  for (int i = 0; i <= count; ++i) {
    nodes.push_back(std::pow(10.0, l0 + static_cast<double>(i) / per_decade));
  }
  return nodes;
}

/// Antiderivative of a nonnegative function tabulated on a node grid.
/// Evaluations add one short adaptive quadrature to a tabulated sum, so
/// nested constructions (integrals of functions defined by integrals) stay
/// cheap while keeping quadrature accuracy.
class CumulativeIntegral {
 public:
  CumulativeIntegral() = default;

  CumulativeIntegral(std::function<double(double)> f, std::vector<double> nodes, bool with_tail,
                     double rel_tol = 1e-13)
      : f_(std::move(f)), nodes_(std::move(nodes)), with_tail_(with_tail) {
    opt_.rel_tol = rel_tol;
    opt_.throw_on_budget = false;
    opt_.max_subdivisions = 400;
    const std::size_t n = nodes_.size();
    std::vector<double> piece(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      piece[i] = integrate(f_, nodes_[i], nodes_[i + 1], opt_).value;
    }
    head_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) head_[i] = head_[i - 1] + piece[i - 1];
    if (with_tail_) {
      QuadratureOptions tail_opt = opt_;
      tail_opt.throw_on_budget = true;
      tail_opt.max_subdivisions = 4000;
      tail_opt.rel_tol = std::max(rel_tol, 1e-12);
      const double beyond = integrate_log_tail(f_, nodes_.back(), tail_opt).value;
      tail_.assign(n, 0.0);
      tail_[n - 1] = beyond;
      for (std::size_t i = n - 1; i-- > 0;) tail_[i] = tail_[i + 1] + piece[i];
    }
  }

  double lo() const { return nodes_.front(); }
  const std::vector<double>& nodes() const { return nodes_; }
  bool has_tail() const { return with_tail_; }

  /// Integral over the whole half line; requires a convergent tail.
  double total() const {
    require_tail();
    return tail_.front();
  }

  /// Integral from the first node to x.
  double from_lo(double x) const {
    if (x <= nodes_.front()) return 0.0;
    if (x >= nodes_.back()) return head_.back() + partial_log(nodes_.back(), x);
    const std::size_t k = locate(x);
    if (x - nodes_[k] <= nodes_[k + 1] - x) return head_[k] + partial(nodes_[k], x);
    return head_[k + 1] - partial(x, nodes_[k + 1]);
  }

  /// Integral from x to infinity.
  double to_inf(double x) const {
    require_tail();
    if (x <= nodes_.front()) return tail_.front() + partial(x, nodes_.front());
    if (x >= nodes_.back()) {
      QuadratureOptions o = opt_;
      o.max_subdivisions = 4000;
      return integrate_log_tail(f_, x, o).value;
    }
    const std::size_t k = locate(x);
    if (x - nodes_[k] <= nodes_[k + 1] - x) return tail_[k] - partial(nodes_[k], x);
    return tail_[k + 1] + partial(x, nodes_[k + 1]);
  }

 private:
  std::size_t locate(double x) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    return static_cast<std::size_t>(std::distance(nodes_.begin(), it)) - 1;
  }

  double partial(double a, double b) const {
    if (a == b) return 0.0;
    return integrate(f_, a, b, opt_).value;
  }

  // Beyond the last node the range may span many decades; t = e^u keeps
  // algebraic tails smooth.
  double partial_log(double a, double b) const {
    if (a == b) return 0.0;
    auto g = [this](double u) {
      const double t = std::exp(u);
      return f_(t) * t;
    };
    return integrate(g, std::log(a), std::log(b), opt_).value;
  }

  void require_tail() const {
    if (!with_tail_) throw Error(Errc::InvalidParameter, "tail integral not tabulated");
  }

  std::function<double(double)> f_;
  std::vector<double> nodes_;
  std::vector<double> head_;
  std::vector<double> tail_;
  bool with_tail_ = false;
  QuadratureOptions opt_;
};

enum class Verdict { Diverges, Converges, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Diverges: return "Diverges";
    case Verdict::Converges: return "Converges";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

struct DivergenceVerdict {
  Verdict verdict = Verdict::Inconclusive;
  /// Estimated q in f(t) ~ t^{-q}; +inf for an identically vanishing tail.
  double tail_exponent_estimate = 0.0;
  std::vector<std::pair<double, double>> partial_values;
};

struct DivergenceOptions {
  double margin = 0.05;
  double rel_tol = 1e-10;
  /// Fraction of the increments (the largest cutoffs) used in the fit.
  double fit_fraction = 0.5;
};

/// Cutoffs 10^{j/2} for T in [10, 10^12].
inline std::vector<double> default_cutoffs() {
  std::vector<double> cutoffs;
  for (int j = 2; j <= 24; ++j) cutoffs.push_back(std::pow(10.0, 0.5 * j));
  return cutoffs;
}

/// Decides whether the integral of a nonnegative f over [lo, inf) diverges
/// from the power-law decay of its partial-integral increments.
template <class Fn>
DivergenceVerdict classify_divergence(Fn&& f, double lo, const std::vector<double>& cutoffs,
                                      const DivergenceOptions& opt = {}) {
  if (cutoffs.size() < 4) throw Error(Errc::InvalidParameter, "need at least 4 cutoffs");
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    if (cutoffs[i] <= (i == 0 ? lo : cutoffs[i - 1])) {
      throw Error(Errc::InvalidParameter, "cutoffs must be strictly increasing and above lo");
    }
  }
  if (std::log10(cutoffs.back() / cutoffs.front()) < 6.0 - 1e-12) {
    throw Error(Errc::InvalidParameter, "cutoffs must span at least 6 decades");
  }
  QuadratureOptions qopt;
  qopt.rel_tol = opt.rel_tol;
  qopt.abs_floor = 1e-300;
  qopt.max_subdivisions = 4000;

  DivergenceVerdict out;
  std::vector<double> increments;
  double running = integrate(f, lo, cutoffs.front(), qopt).value;
  out.partial_values.emplace_back(cutoffs.front(), running);
  for (std::size_t i = 0; i + 1 < cutoffs.size(); ++i) {
    const double inc = integrate(f, cutoffs[i], cutoffs[i + 1], qopt).value;
    increments.push_back(inc);
    running += inc;
    out.partial_values.emplace_back(cutoffs[i + 1], running);
  }

  const std::size_t n_inc = increments.size();
  std::size_t n_fit = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(opt.fit_fraction * n_inc)));
  n_fit = std::min(n_fit, n_inc);
  const std::size_t first = n_inc - n_fit;

  bool vanishing = true;
  for (std::size_t i = first; i < n_inc; ++i) vanishing = vanishing && increments[i] <= 0.0;
  if (vanishing) {
    out.verdict = Verdict::Converges;
    out.tail_exponent_estimate = std::numeric_limits<double>::infinity();
    return out;
  }

  // Least-squares slope of log(increment) against log(T).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = first; i < n_inc; ++i) {
    if (increments[i] <= 0.0) continue;
    const double x = std::log(cutoffs[i]);
    const double y = std::log(increments[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) {
    out.verdict = Verdict::Inconclusive;
    out.tail_exponent_estimate = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double q = 1.0 - slope;
  out.tail_exponent_estimate = q;

  bool decreasing = true;
  for (std::size_t i = first + 1; i < n_inc; ++i) decreasing = decreasing && increments[i] < increments[i - 1];
  const bool non_decaying = increments.back() >= (1.0 - opt.margin) * increments[first];

  if (q > 1.0 + opt.margin) {
    out.verdict = decreasing ? Verdict::Converges : Verdict::Inconclusive;
  } else if (q < 1.0 - opt.margin) {
    out.verdict = Verdict::Diverges;
  } else {
    // Critical band: a t^{-1} tail gives equal increments per decade.
    out.verdict = non_decaying ? Verdict::Diverges : Verdict::Inconclusive;
  }
  return out;
}

struct InversionOptions {
  double tol = 1e-14;
  int max_iter = 300;
  /// Upper limit of the automatic bracket expansion.
  double hi_limit = 1e16;
};

namespace detail {

template <class Fn, class DFn>
double invert_impl(Fn& f, DFn* df, double y, std::optional<std::pair<double, double>> bracket,
                   const InversionOptions& opt) {
  double lo = 0.0, hi = 1.0;
  double flo = 0.0, fhi = 0.0;
  if (bracket) {
    lo = bracket->first;
    hi = bracket->second;
    flo = f(lo);
    fhi = f(hi);
    if (!(flo <= y && y <= fhi)) {
      throw Error(Errc::BracketInvalid, "target outside [f(lo), f(hi)]");
    }
  } else {
    flo = f(lo);
    if (!(flo <= y)) throw Error(Errc::BracketInvalid, "target below f(0)");
    fhi = f(hi);
    while (fhi < y) {
      lo = hi;
      flo = fhi;
      hi *= 2.0;
      if (hi > opt.hi_limit) throw Error(Errc::BracketInvalid, "bracket expansion exceeded limit");
      fhi = f(hi);
    }
  }
  if (flo == y) return lo;
  if (fhi == y) return hi;

  double x = 0.5 * (lo + hi);
  double best_x = x;
  double best_r = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iter; ++it) {
    const double fx = f(x);
    const double r = fx - y;
    if (std::abs(r) < best_r) {
      best_r = std::abs(r);
      best_x = x;
    }
    if (r == 0.0) return x;
    if (r < 0.0) lo = x; else hi = x;
    const double width = hi - lo;
    if (width <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) break;
    double next = 0.5 * (lo + hi);
    if (df != nullptr) {
      const double slope = (*df)(x);
      if (slope > 0.0 && std::isfinite(slope)) {
        const double newton = x - r / slope;
        if (newton > lo && newton < hi) {
          const double step = std::abs(newton - x);
          next = newton;
          if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x) && best_r <= opt.tol) {
            x = newton;
            const double rr = std::abs(f(x) - y);
            return rr <= best_r ? x : best_x;
          }
        }
      }
    } else if (best_r <= opt.tol * 1e-2) {
      break;
    }
    x = next;
  }
  return best_x;
}

}  // namespace detail

/// Solves f(x) = y for strictly increasing f by bisection, refined with
/// safeguarded Newton steps when `df` is provided. Without a bracket the
/// search starts from [0, 1] and doubles the upper end.
template <class Fn>
double invert_monotone(Fn&& f, double y, std::optional<std::pair<double, double>> bracket = std::nullopt,
                       const InversionOptions& opt = {}) {
  using NoDeriv = double (*)(double);
  return detail::invert_impl<std::remove_reference_t<Fn>, NoDeriv>(f, nullptr, y, bracket, opt);
}

template <class Fn, class DFn>
double invert_monotone(Fn&& f, DFn&& df, double y,
                       std::optional<std::pair<double, double>> bracket = std::nullopt,
                       const InversionOptions& opt = {}) {
  return detail::invert_impl<std::remove_reference_t<Fn>, std::remove_reference_t<DFn>>(f, &df, y, bracket, opt);
}

}  // namespace lingrow
