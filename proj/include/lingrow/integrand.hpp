#pragma once

// Linear-growth integrands F with F'(s) = a(s) s, normalized so that
// F(0) = 0 and F'(s) -> 1, plus the hypothesis checks that decide between
// the generally solvable and the obstructed regime.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lingrow/calculus.hpp"
#include "lingrow/error.hpp"

namespace lingrow {

/// Evaluation back end of an integrand. Implementations provide F'' and the
/// pieces of F' that need care to evaluate without cancellation.
class IntegrandModel {
 public:
  virtual ~IntegrandModel() = default;

  virtual double ddF(double s) const = 0;
  virtual double dF(double s) const = 0;
  /// 1 - F'(s), accurate when F'(s) is close to 1.
  virtual double tail(double s) const = 0;
  /// Integral of t F''(t) over [0, s].
  virtual double moment(double s) const = 0;

  virtual double a(double s) const { return s == 0.0 ? ddF(0.0) : dF(s) / s; }

  virtual double da(double s) const {
    if (s <= 0.0) s = 1e-8;
    return (ddF(s) - a(s)) / s;
  }
};

/// Immutable handle to a normalized integrand. Copies share the model.
class Integrand {
 public:
  Integrand() = default;
  Integrand(std::shared_ptr<const IntegrandModel> model, std::string label, bool normalized,
            double far_grid_max = 1e8)
      : model_(std::move(model)), label_(std::move(label)), normalized_(normalized),
        far_grid_max_(far_grid_max) {}

  double F(double s) const { return s == 0.0 ? 0.0 : s * model_->dF(s) - model_->moment(s); }
  double dF(double s) const { return model_->dF(s); }
  double ddF(double s) const { return model_->ddF(s); }
  double a(double s) const { return model_->a(s); }
  double da(double s) const { return model_->da(s); }
  double tail(double s) const { return model_->tail(s); }
  double moment(double s) const { return model_->moment(s); }

  /// s^2 a'(s) = s F''(s) - F'(s), evaluated without forming a'.
  double s2_da(double s) const { return s * ddF(s) - dF(s); }

  /// s F''(s) / F'(s) - 1 = s a'(s) / a(s).
  double log_slope_a(double s) const { return s * ddF(s) / dF(s) - 1.0; }

  /// (F')^{-1}(1 - w) for w in (0, 1]: the argument is passed as its
  /// complement so that values of F' within round-off of 1 stay resolvable.
  double inverse_dF_tail(double w) const {
    if (!(w > 0.0)) throw Error(Errc::BracketInvalid, "(F')^{-1} is unbounded at 1");
    if (w >= 1.0) return 0.0;
    // Solve -log(tail(e^u)) = -log(w) in u = log s.
    auto f = [this](double u) {
      const double t = model_->tail(std::exp(u));
      return t > 0.0 ? -std::log(t) : std::numeric_limits<double>::max();
    };
    auto df = [this](double u) {
      const double s = std::exp(u);
      return s * model_->ddF(s) / model_->tail(s);
    };
    const double target = -std::log(w);
    double lo = -1.0, hi = 1.0;
    while (f(lo) > target) {
      lo *= 2.0;
      if (lo < -745.0) return 0.0;
    }
    while (f(hi) < target) {
      hi *= 2.0;
      if (hi > 700.0) throw Error(Errc::BracketInvalid, "(F')^{-1} beyond representable range");
    }
    InversionOptions opt;
    opt.tol = 1e-15 * std::max(1.0, target);
    return std::exp(invert_monotone(f, df, target, std::make_pair(lo, hi), opt));
  }

  /// (F')^{-1}(y) for y in [0, 1).
  double inverse_dF(double y) const {
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) throw Error(Errc::BracketInvalid, "(F')^{-1} is unbounded at 1");
    return inverse_dF(y, 1.0 - y);
  }

  /// (F')^{-1} given both y and w = 1 - y, each accurate on its own; the
  /// smaller of the two drives the solve.
  double inverse_dF(double y, double w) const {
    if (y <= 0.0) return 0.0;
    if (w < 0.5) return inverse_dF_tail(w);
    // Solve log F'(e^u) = log y.
    auto f = [this](double u) {
      const double v = model_->dF(std::exp(u));
      return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::max();
    };
    auto df = [this](double u) {
      const double s = std::exp(u);
      return s * model_->ddF(s) / model_->dF(s);
    };
    const double target = std::log(y);
    double lo = -1.0, hi = 1.0;
    while (f(lo) > target) {
      lo *= 2.0;
      if (lo < -745.0) return 0.0;
    }
    while (f(hi) < target) {
      hi *= 2.0;
      if (hi > 700.0) throw Error(Errc::BracketInvalid, "(F')^{-1} beyond representable range");
    }
    InversionOptions opt;
    opt.tol = 1e-15 * std::max(1.0, std::abs(target));
    return std::exp(invert_monotone(f, df, target, std::make_pair(lo, hi), opt));
  }

  const std::string& label() const { return label_; }
  bool normalized() const { return normalized_; }
  double far_grid_max() const { return far_grid_max_; }
  bool valid() const { return model_ != nullptr; }
  const std::shared_ptr<const IntegrandModel>& model() const { return model_; }

 private:
  std::shared_ptr<const IntegrandModel> model_;
  std::string label_;
  bool normalized_ = false;
  double far_grid_max_ = 1e8;
};

/// Node grid shared by the tabulated antiderivatives.
inline std::vector<double> integrand_nodes() { return geometric_nodes(1e-8, 1e150, 8); }

namespace detail {

/// a_p(s) = (1+s^p)^{-1/p} in closed form; F and the moment are tabulated.
class PrototypeModel final : public IntegrandModel {
 public:
  explicit PrototypeModel(double p) : p_(p) {
    moment_ = CumulativeIntegral([this](double t) { return moment_density(t); }, integrand_nodes(), false);
  }

  double ddF(double s) const override {
    if (s <= 1.0) return std::pow(1.0 + std::pow(s, p_), -1.0 - 1.0 / p_);
    return std::pow(s, -(p_ + 1.0)) * std::pow(1.0 + std::pow(s, -p_), -1.0 - 1.0 / p_);
  }
  double dF(double s) const override {
    if (s <= 1.0) return s * std::pow(1.0 + std::pow(s, p_), -1.0 / p_);
    return std::pow(1.0 + std::pow(s, -p_), -1.0 / p_);
  }
  double tail(double s) const override {
    if (s <= 1.0) return 1.0 - dF(s);
    return -std::expm1(-std::log1p(std::pow(s, -p_)) / p_);
  }
  double moment(double s) const override { return moment_.from_lo(s); }
  /// t F''(t), written so that it does not underflow where F'' does.
  double moment_density(double t) const {
    if (t <= 1.0) return t * ddF(t);
    const double q = std::pow(t, -p_);
    return q * std::pow(1.0 + q, -1.0 - 1.0 / p_);
  }
  double a(double s) const override {
    if (s <= 1.0) return std::pow(1.0 + std::pow(s, p_), -1.0 / p_);
    return std::pow(1.0 + std::pow(s, -p_), -1.0 / p_) / s;
  }
  double da(double s) const override {
    if (s == 0.0) {
      if (p_ < 1.0) return -std::numeric_limits<double>::infinity();
      return p_ == 1.0 ? -1.0 : 0.0;
    }
    if (s <= 1.0) return -std::pow(s, p_ - 1.0) * std::pow(1.0 + std::pow(s, p_), -1.0 / p_ - 1.0);
    return -std::pow(1.0 + std::pow(s, -p_), -1.0 / p_ - 1.0) / (s * s);
  }

 private:
  double p_;
  CumulativeIntegral moment_;
};

/// Integrand defined by a positive F''; F' is recovered from the tail
/// integral and rescaled so that F'(inf) = 1.
class CustomModel final : public IntegrandModel {
 public:
  explicit CustomModel(std::function<double(double)> ddF_raw)
      : raw_(std::move(ddF_raw)) {
    mass_ = CumulativeIntegral(raw_, integrand_nodes(), true);
    inv_scale_ = 1.0 / mass_.total();
    moment_ = CumulativeIntegral([f = raw_](double t) { return t * f(t); }, integrand_nodes(), false);
  }

  double ddF(double s) const override { return raw_(s) * inv_scale_; }
  double dF(double s) const override {
    const double head = mass_.from_lo(s) * inv_scale_;
    if (head <= 0.5) return head;
    return 1.0 - mass_.to_inf(s) * inv_scale_;
  }
  double tail(double s) const override {
    const double head = mass_.from_lo(s) * inv_scale_;
    if (head <= 0.5) return 1.0 - head;
    return mass_.to_inf(s) * inv_scale_;
  }
  double moment(double s) const override { return moment_.from_lo(s) * inv_scale_; }

  double unnormalized_mass() const { return 1.0 / inv_scale_; }

 private:
  std::function<double(double)> raw_;
  double inv_scale_ = 1.0;
  CumulativeIntegral mass_;
  CumulativeIntegral moment_;
};

}  // namespace detail

/// Prototype family a_p(s) = (1+s^p)^{-1/p}; p = 2 is the minimal surface
/// equation. Already normalized.
inline Integrand make_prototype(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw Error(Errc::InvalidParameter, "prototype exponent p must be positive");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "prototype{p=%g}", p);
  return Integrand(std::make_shared<detail::PrototypeModel>(p), buf, true);
}

/// Geometric sample grid used by the hypothesis checks.
inline std::vector<double> sample_grid(double lo, double hi, int count) {
  std::vector<double> grid(count);
  const double l0 = std::log(lo), l1 = std::log(hi);
  for (int i = 0; i < count; ++i) grid[i] = std::exp(l0 + (l1 - l0) * i / (count - 1));
  return grid;
}

/// Builds a normalized integrand from its second derivative.
inline Integrand make_custom(std::function<double(double)> ddF, double far_grid_max = 1e8,
                             std::string label = "custom") {
  if (!(far_grid_max > 1.0)) throw Error(Errc::InvalidParameter, "far_grid_max must exceed 1");
  // F'' must be positive; an exponentially decaying F'' may underflow to
  // zero far out, which is accepted once it stays zero.
  bool underflowed = false;
  for (double s : sample_grid(1e-6, far_grid_max, 400)) {
    const double v = ddF(s);
    const bool ok = std::isfinite(v) && (v > 0.0 || (v == 0.0 && s > 1.0));
    if (!ok || (underflowed && v > 0.0)) {
      throw Error(Errc::NotStrictlyConvex, "F'' is not positive at s = " + std::to_string(s));
    }
    underflowed = v == 0.0;
  }
  const auto tail = classify_divergence(ddF, 1.0, default_cutoffs());
  if (tail.verdict == Verdict::Diverges) {
    throw Error(Errc::NotLinearGrowth, "integral of F'' diverges; F is not of linear growth");
  }
  return Integrand(std::make_shared<detail::CustomModel>(std::move(ddF)), std::move(label), true,
                   far_grid_max);
}

/// Fritsch-Carlson monotone cubic interpolant of tabulated (t, F''(t)).
/// Below the first abscissa the first value is held; beyond the last one a
/// power law through the last two samples continues the tail.
class MonotoneCubic {
 public:
  MonotoneCubic(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
    const std::size_t n = t_.size();
    if (n < 2 || y_.size() != n) throw Error(Errc::InvalidParameter, "need at least two samples");
    for (std::size_t i = 1; i < n; ++i) {
      if (!(t_[i] > t_[i - 1])) throw Error(Errc::InvalidParameter, "abscissae must increase");
    }
    for (double v : y_) {
      if (!(v > 0.0)) throw Error(Errc::NotStrictlyConvex, "tabulated F'' must be positive");
    }
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (t_[i + 1] - t_[i]);
    m_.assign(n, 0.0);
    m_[0] = delta[0];
    m_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      m_[i] = delta[i - 1] * delta[i] <= 0.0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (delta[i] == 0.0) {
        m_[i] = m_[i + 1] = 0.0;
        continue;
      }
      const double al = m_[i] / delta[i], be = m_[i + 1] / delta[i];
      const double r = al * al + be * be;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        m_[i] = tau * al * delta[i];
        m_[i + 1] = tau * be * delta[i];
      }
    }
    tail_exponent_ = -std::log(y_[n - 1] / y_[n - 2]) / std::log(t_[n - 1] / t_[n - 2]);
  }

  double operator()(double x) const {
    if (x <= t_.front()) return y_.front();
    if (x >= t_.back()) return y_.back() * std::pow(x / t_.back(), -tail_exponent_);
    auto it = std::upper_bound(t_.begin(), t_.end(), x);
    const std::size_t k = static_cast<std::size_t>(std::distance(t_.begin(), it)) - 1;
    const double h = t_[k + 1] - t_[k];
    const double u = (x - t_[k]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * y_[k] + h10 * h * m_[k] + h01 * y_[k + 1] + h11 * h * m_[k + 1];
  }

  double tail_exponent() const { return tail_exponent_; }

 private:
  std::vector<double> t_, y_, m_;
  double tail_exponent_ = 2.0;
};

struct HypothesisReport {
  bool linear_growth = false;
  double C1 = 0.0;
  double C2_growth = 0.0;
  /// Oscillation bound for F''(s)/F''(t), s >= 1, t in [s/2, 2s]; only
  /// verified on the sample grid, never proven.
  bool oscillation_bound = false;
  double C2_oscillation = 0.0;
  DivergenceVerdict criterion_A2;
  bool normalization_A3 = false;
  double R2_residual = 0.0;
  double R3_residual = 0.0;
  double bernstein_genre = 0.0;
  bool regularly_elliptic = false;
  DivergenceVerdict regular_ellipticity_test;

  double C2() const { return std::max(C2_growth, C2_oscillation); }
};

struct HypothesisOptions {
  int grid_points = 400;
  double grid_min = 1e-6;
  /// Dimension entering the trace of the coefficient matrix.
  int dimension = 2;
  DivergenceOptions divergence;
};

/// Checks growth, oscillation, the solvability criterion and the
/// asymptotic limits of s F''(s) and s^2 a'(s) on sample grids.
inline HypothesisReport check_hypotheses(const Integrand& I, const HypothesisOptions& opt = {}) {
  HypothesisReport rep;
  const double far_max = I.far_grid_max();
  const auto grid = sample_grid(opt.grid_min, far_max, opt.grid_points);

  // Linear growth: C1 = inf F' for s >= 1, C2 covering both inequalities.
  rep.C1 = std::numeric_limits<double>::infinity();
  for (double s : grid) {
    if (s >= 1.0) rep.C1 = std::min(rep.C1, I.dF(s));
  }
  rep.C2_growth = 0.0;
  for (double s : grid) {
    const double F = I.F(s);
    rep.C2_growth = std::max({rep.C2_growth, rep.C1 * s - F, F / (1.0 + s)});
  }
  rep.linear_growth = rep.C1 > 0.0 && std::isfinite(rep.C2_growth) && rep.C2_growth > 0.0;

  // Oscillation of F'' on dyadic neighbourhoods; the bound is refuted when
  // the ratio keeps growing over the upper half of the grid.
  double lower_half = 0.0, upper_half = 0.0;
  const double split = std::sqrt(far_max);
  for (double s : grid) {
    if (s < 1.0) continue;
    double worst = 0.0;
    for (int j = 0; j <= 16; ++j) {
      const double t = s * std::pow(2.0, -1.0 + j / 8.0);
      worst = std::max(worst, I.ddF(s) / I.ddF(t));
    }
    (s < split ? lower_half : upper_half) = std::max(s < split ? lower_half : upper_half, worst);
  }
  rep.C2_oscillation = std::max(lower_half, upper_half);
  rep.oscillation_bound = std::isfinite(rep.C2_oscillation) && upper_half <= 2.0 * std::max(lower_half, 1.0);

  rep.criterion_A2 = classify_divergence([&I](double t) { return t * I.ddF(t); }, 1.0, default_cutoffs(),
                                         opt.divergence);

  const double S = std::max(1e6, far_max);
  rep.normalization_A3 = I.F(0.0) == 0.0 && std::abs(I.dF(far_max) - 1.0) <= 1e-3 &&
                         std::abs(I.F(S) / S - 1.0) <= 1e-2;

  // Limits at infinity, probed on the top two decades of the grid.
  const auto far = sample_grid(far_max / 100.0, far_max, 41);
  rep.R2_residual = 0.0;
  rep.R3_residual = 0.0;
  for (double s : far) {
    rep.R2_residual = std::max(rep.R2_residual, s * I.ddF(s));
    rep.R3_residual = std::max(rep.R3_residual, std::abs(I.s2_da(s) + 1.0));
  }

  // Bernstein genre from A(z).(z x z) / tr A(z) ~ |z|^{2-g}, with
  // A(z).(z x z) = |z|^2 F'' and tr A = F'' + (d-1) a.
  const double d = opt.dimension;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double s : far) {
    const double ratio = s * s * I.ddF(s) / (I.ddF(s) + (d - 1.0) * I.a(s));
    const double x = std::log(s), y = std::log(ratio);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double m = static_cast<double>(far.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  rep.bernstein_genre = 2.0 - slope;

  // Sufficient condition for regular ellipticity: the integral of
  // F''/(a' t + d a) = F''/(F'' + (d-1) a) diverges.
  rep.regular_ellipticity_test = classify_divergence(
      [&I, d](double t) { return I.ddF(t) / (I.ddF(t) + (d - 1.0) * I.a(t)); }, 1.0, default_cutoffs(),
      opt.divergence);
  rep.regularly_elliptic = rep.regular_ellipticity_test.verdict == Verdict::Diverges;
  return rep;
}

struct ConjugatePoint {
  double y = 0.0;
  double value = 0.0;
};

struct ConjugateReport {
  std::vector<ConjugatePoint> points;
  double threshold = 10.0;
  bool blows_up = false;
};

/// 1 - 10^{-k} for k = 1..12.
inline std::vector<double> default_conjugate_grid() {
  std::vector<double> y;
  for (int k = 1; k <= 12; ++k) y.push_back(1.0 - std::pow(10.0, -k));
  return y;
}

/// Convex conjugate F*(y) = y s - F(s) at s = (F')^{-1}(y). At the
/// maximizer this equals the moment integral of t F'' over [0, s], which is
/// how it is evaluated (no cancellation between y s and F(s)).
inline ConjugateReport conjugate_blowup_test(const Integrand& I, const std::vector<double>& y_grid,
                                             double threshold = 10.0) {
  if (!I.normalized()) throw Error(Errc::InvalidParameter, "integrand must be normalized");
  ConjugateReport rep;
  rep.threshold = threshold;
  for (double y : y_grid) {
    const double s = I.inverse_dF(y);
    rep.points.push_back({y, I.moment(s)});
  }
  rep.blows_up = !rep.points.empty() && rep.points.back().value > threshold;
  return rep;
}

}  // namespace lingrow
