#pragma once

// Piecewise-linear finite elements for the regularized problems
//   minimize  sum_T |T| [ (eps/2) |grad w|^2 + F(|grad w|) ]
// over fields with prescribed boundary values, solved by damped Newton.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lingrow/error.hpp"
#include "lingrow/integrand.hpp"
#include "lingrow/mesh.hpp"

namespace lingrow {

struct DiscreteField {
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> values;

  /// Constant gradient on triangle t.
  std::array<double, 2> gradient(std::size_t t) const {
    const auto& T = mesh->triangles[t];
    const Point& a = mesh->vertices[T[0]];
    const Point& b = mesh->vertices[T[1]];
    const Point& c = mesh->vertices[T[2]];
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    const double du1 = values[T[1]] - values[T[0]], du2 = values[T[2]] - values[T[0]];
    return {(du1 * (c[1] - a[1]) - du2 * (b[1] - a[1])) / det, (du2 * (b[0] - a[0]) - du1 * (c[0] - a[0])) / det};
  }
};

struct SolveOptions {
  double newton_tol = 1e-9;
  int max_newton = 200;
  int max_halvings = 50;
  double armijo = 1e-4;
};

struct SolveResult {
  DiscreteField field;
  bool converged = false;
  int newton_iters = 0;
  double residual_norm = 0.0;
  /// Set when the line search failed; the field is the best iterate.
  bool stalled = false;
  /// Energies of the accepted iterates, accumulated from exact decrements.
  std::vector<double> energy_history;
};

namespace detail {

/// Per-triangle geometry: area and gradients of the three hat functions.
struct ElementGeometry {
  double area = 0.0;
  std::array<std::array<double, 2>, 3> dphi{};
};

inline std::vector<ElementGeometry> element_geometry(const Mesh& m) {
  std::vector<ElementGeometry> geo(m.triangles.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& T = m.triangles[t];
    const Point& a = m.vertices[T[0]];
    const Point& b = m.vertices[T[1]];
    const Point& c = m.vertices[T[2]];
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    ElementGeometry& g = geo[t];
    g.area = 0.5 * det;
    g.dphi[0] = {(b[1] - c[1]) / det, (c[0] - b[0]) / det};
    g.dphi[1] = {(c[1] - a[1]) / det, (a[0] - c[0]) / det};
    g.dphi[2] = {(a[1] - b[1]) / det, (b[0] - a[0]) / det};
  }
  return geo;
}

inline std::array<double, 2> element_gradient(const Mesh& m, const ElementGeometry& g, std::size_t t,
                                              const std::vector<double>& u) {
  const auto& T = m.triangles[t];
  std::array<double, 2> grad{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    grad[0] += u[T[i]] * g.dphi[i][0];
    grad[1] += u[T[i]] * g.dphi[i][1];
  }
  return grad;
}

class EnergyProblem {
 public:
  EnergyProblem(const Integrand& I, const Mesh& m, double eps)
      : I_(I), m_(m), eps_(eps), geo_(element_geometry(m)) {}

  double energy(const std::vector<double>& u) const {
    double E = 0.0;
    for (std::size_t t = 0; t < m_.triangles.size(); ++t) {
      const auto g = element_gradient(m_, geo_[t], t, u);
      const double s = std::hypot(g[0], g[1]);
      E += geo_[t].area * (0.5 * eps_ * s * s + I_.F(s));
    }
    return E;
  }

  /// Gradient of the energy; the Hessian is assembled when H is non-null.
  void derivatives(const std::vector<double>& u, std::vector<double>& r,
                   std::vector<Eigen::Triplet<double>>* H) const {
    r.assign(u.size(), 0.0);
    if (H) H->clear();
    for (std::size_t t = 0; t < m_.triangles.size(); ++t) {
      const auto& T = m_.triangles[t];
      const ElementGeometry& G = geo_[t];
      const auto g = element_gradient(m_, G, t, u);
      const double s = std::hypot(g[0], g[1]);
      const double a = I_.a(s);
      const double coef = eps_ + a;
      for (int i = 0; i < 3; ++i) {
        r[T[i]] += G.area * coef * (g[0] * G.dphi[i][0] + g[1] * G.dphi[i][1]);
      }
      if (!H) continue;
      // (eps + a) Id + (F'' - a) n n^T, the dyad dropped near zero gradient.
      double A[2][2] = {{coef, 0.0}, {0.0, coef}};
      if (s > 1e-10) {
        const double n0 = g[0] / s, n1 = g[1] / s;
        const double extra = I_.ddF(s) - a;
        A[0][0] += extra * n0 * n0;
        A[0][1] += extra * n0 * n1;
        A[1][0] += extra * n1 * n0;
        A[1][1] += extra * n1 * n1;
      }
      for (int i = 0; i < 3; ++i) {
        const double ax = A[0][0] * G.dphi[i][0] + A[0][1] * G.dphi[i][1];
        const double ay = A[1][0] * G.dphi[i][0] + A[1][1] * G.dphi[i][1];
        for (int j = 0; j < 3; ++j) {
          H->emplace_back(T[i], T[j], G.area * (ax * G.dphi[j][0] + ay * G.dphi[j][1]));
        }
      }
    }
  }

  /// energy(v) - energy(u) with F(s') - F(s) = int_s^{s'} F' by a fixed
  /// Gauss-Legendre rule, smooth in v unlike a difference of two tabulated values.
  double energy_change(const std::vector<double>& u, const std::vector<double>& v) const {
    static constexpr double node[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                       0.8650633666889845, 0.9739065285171717};
    static constexpr double weight[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                         0.1494513491505806, 0.0666713443086881};
    double dE = 0.0;
    for (std::size_t t = 0; t < m_.triangles.size(); ++t) {
      const auto g0 = element_gradient(m_, geo_[t], t, u);
      const auto g1 = element_gradient(m_, geo_[t], t, v);
      const double s0 = std::hypot(g0[0], g0[1]), s1 = std::hypot(g1[0], g1[1]);
      if (s0 == s1) continue;
      const double mid = 0.5 * (s0 + s1), half = 0.5 * (s1 - s0);
      double dF = 0.0;
      for (int k = 0; k < 5; ++k) {
        dF += weight[k] * (I_.dF(mid + half * node[k]) + I_.dF(mid - half * node[k]));
      }
      dE += geo_[t].area * (0.5 * eps_ * (s1 - s0) * (s1 + s0) + half * dF);
    }
    return dE;
  }

  const std::vector<ElementGeometry>& geometry() const { return geo_; }

 private:
  const Integrand& I_;
  const Mesh& m_;
  double eps_;
  std::vector<ElementGeometry> geo_;
};

/// Restricts a global matrix to the free (non-boundary) vertices.
struct FreeIndex {
  std::vector<int> global_to_free;
  std::vector<int> free_to_global;

  explicit FreeIndex(const Mesh& m) : global_to_free(m.vertices.size(), -1) {
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      if (!m.boundary[v]) {
        global_to_free[v] = static_cast<int>(free_to_global.size());
        free_to_global.push_back(static_cast<int>(v));
      }
    }
  }

  Eigen::SparseMatrix<double> restrict(const std::vector<Eigen::Triplet<double>>& trip) const {
    std::vector<Eigen::Triplet<double>> kept;
    kept.reserve(trip.size());
    for (const auto& e : trip) {
      const int i = global_to_free[e.row()], j = global_to_free[e.col()];
      if (i >= 0 && j >= 0) kept.emplace_back(i, j, e.value());
    }
    const int n = static_cast<int>(free_to_global.size());
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(kept.begin(), kept.end());
    return A;
  }
};

}  // namespace detail

/// Discrete harmonic extension of the boundary values.
inline std::vector<double> harmonic_extension(const Mesh& m, const std::vector<double>& u0) {
  const auto geo = detail::element_geometry(m);
  const detail::FreeIndex idx(m);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.free_to_global.size()));
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& T = m.triangles[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double k = geo[t].area * (geo[t].dphi[i][0] * geo[t].dphi[j][0] + geo[t].dphi[i][1] * geo[t].dphi[j][1]);
        trip.emplace_back(T[i], T[j], k);
        const int fi = idx.global_to_free[T[i]];
        if (fi >= 0 && m.boundary[T[j]]) rhs[fi] -= k * u0[T[j]];
      }
    }
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(idx.restrict(trip));
  const Eigen::VectorXd x = solver.solve(rhs);
  std::vector<double> u(m.vertices.size());
  for (std::size_t v = 0; v < u.size(); ++v) {
    const int f = idx.global_to_free[v];
    u[v] = f >= 0 ? x[f] : u0[v];
  }
  return u;
}

/// Minimizes the regularized energy with the boundary values of u0. The
/// iteration starts from `initial` when given (boundary values are reset to
/// u0), else from the harmonic extension. Newton steps are damped by Armijo
/// backtracking on the energy; a step that cannot be accepted after
/// max_halvings halvings ends the solve unconverged with the best iterate.
inline SolveResult solve_eps(const Integrand& I, std::shared_ptr<const Mesh> mesh, const std::vector<double>& u0,
                             double eps, const SolveOptions& opt = {}, const std::vector<double>* initial = nullptr) {
  if (!(eps > 0.0)) throw Error(Errc::InvalidParameter, "eps must be positive");
  const Mesh& m = *mesh;
  if (u0.size() != m.vertices.size()) throw Error(Errc::InvalidParameter, "boundary data must have one value per vertex");
  for (std::size_t v = 0; v < u0.size(); ++v) {
    if (m.boundary[v] && !std::isfinite(u0[v])) throw Error(Errc::InvalidParameter, "boundary data not finite");
  }
  std::vector<double> u = initial ? *initial : harmonic_extension(m, u0);
  for (std::size_t v = 0; v < u.size(); ++v) {
    if (m.boundary[v]) u[v] = u0[v];
  }

  const detail::EnergyProblem problem(I, m, eps);
  const detail::FreeIndex idx(m);
  const auto nfree = static_cast<Eigen::Index>(idx.free_to_global.size());
  SolveResult res;
  std::vector<double> r;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  double E = problem.energy(u);
  res.energy_history.push_back(E);
  auto free_residual = [&](const std::vector<double>& rr) {
    Eigen::VectorXd g(nfree);
    for (Eigen::Index i = 0; i < nfree; ++i) g[i] = rr[idx.free_to_global[i]];
    return g;
  };

  for (int it = 0; it <= opt.max_newton; ++it) {
    problem.derivatives(u, r, &trip);
    const Eigen::VectorXd g = free_residual(r);
    res.residual_norm = g.norm();
    if (res.residual_norm <= opt.newton_tol) {
      res.converged = true;
      break;
    }
    if (it == opt.max_newton) break;
    const Eigen::SparseMatrix<double> H = idx.restrict(trip);
    if (!analyzed) {
      ldlt.analyzePattern(H);
      analyzed = true;
    }
    ldlt.factorize(H);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success) {
      step = ldlt.solve(-g);
    }
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(g) >= 0.0) {
      step = -g;  // steepest descent fallback
    }
    const double slope = step.dot(g);
    double t = 1.0;
    bool accepted = false;
    std::vector<double> trial(u);
    for (int k = 0; k <= opt.max_halvings; ++k) {
      for (Eigen::Index i = 0; i < nfree; ++i) trial[idx.free_to_global[i]] = u[idx.free_to_global[i]] + t * step[i];
      const double dE = problem.energy_change(u, trial);
      if (std::isfinite(dE) && dE <= opt.armijo * t * slope) {
        u.swap(trial);
        E += dE;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    ++res.newton_iters;
    if (!accepted) {
      res.stalled = true;
      break;
    }
    res.energy_history.push_back(E);
  }
  res.field = DiscreteField{std::move(mesh), std::move(u)};
  return res;
}

struct SweepRecord {
  double eps = 0.0;
  double energy = 0.0;
  double sup_u = 0.0;
  double sup_grad = 0.0;
  double boundary_layer_ratio = 1.0;
  double ae1 = 0.0;
  int newton_iters = 0;
  bool converged = false;
  double residual_norm = 0.0;
};

/// sup |u|, sup |grad u|, the ratio of the largest gradient on triangles
/// touching the boundary to the largest on the others (1 for a constant field),
/// the energy and eps ||grad u||_2^2 + ||grad u||_1.
inline SweepRecord diagnostics(const DiscreteField& field, const Integrand& I, double eps) {
  const Mesh& m = *field.mesh;
  SweepRecord rec;
  rec.eps = eps;
  for (double v : field.values) rec.sup_u = std::max(rec.sup_u, std::abs(v));
  double boundary_max = 0.0, interior_max = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto g = field.gradient(t);
    const double s = std::hypot(g[0], g[1]);
    const double area = m.signed_area(t);
    rec.energy += area * (0.5 * eps * s * s + I.F(s));
    rec.ae1 += area * (eps * s * s + s);
    rec.sup_grad = std::max(rec.sup_grad, s);
    const auto& T = m.triangles[t];
    const bool touches = m.boundary[T[0]] || m.boundary[T[1]] || m.boundary[T[2]];
    (touches ? boundary_max : interior_max) = std::max(touches ? boundary_max : interior_max, s);
  }
  // Gradients below the Newton dyad cutoff are roundoff of a constant field.
  constexpr double zero_grad = 1e-10;
  if (rec.sup_grad <= zero_grad) {
    rec.boundary_layer_ratio = 1.0;
  } else if (interior_max > 0.0) {
    rec.boundary_layer_ratio = boundary_max / interior_max;
  } else {
    rec.boundary_layer_ratio = std::numeric_limits<double>::infinity();
  }
  return rec;
}

struct EpsSweepReport {
  std::vector<SweepRecord> records;
  std::string classification = "undetermined";
  std::shared_ptr<const Mesh> mesh;
  /// Converged field of every eps, in sweep order.
  std::vector<std::vector<double>> fields;
};

struct SweepOptions {
  double uniform_band = 0.1;
  double blowup_factor = 10.0;
  SolveOptions solve;
};

/// "uniform" when sup |grad u| varies by at most the band over the last three
/// eps, "blow-up" when it grows by the factor from the first to the last eps.
inline std::string classify_sweep(const std::vector<SweepRecord>& recs, const SweepOptions& opt = {}) {
  if (recs.size() < 3) return "undetermined";
  const std::size_t n = recs.size();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = n - 3; i < n; ++i) {
    lo = std::min(lo, recs[i].sup_grad);
    hi = std::max(hi, recs[i].sup_grad);
  }
  if (lo > 0.0 && (hi - lo) / lo <= opt.uniform_band) return "uniform";
  if (hi == 0.0) return "uniform";
  if (recs.front().sup_grad > 0.0 && recs.back().sup_grad / recs.front().sup_grad >= opt.blowup_factor) {
    return "blow-up";
  }
  return "undetermined";
}

inline std::vector<double> sample_boundary(const Mesh& m, const std::function<double(const Point&)>& u0) {
  std::vector<double> vals(m.vertices.size(), 0.0);
  for (std::size_t v = 0; v < vals.size(); ++v) {
    if (m.boundary[v]) vals[v] = u0(m.vertices[v]);
  }
  return vals;
}

/// Solves for each eps in decreasing order, warm-starting from the previous
/// solution. A solve that fails to converge is recorded and the sweep goes on.
inline EpsSweepReport eps_sweep(const Integrand& I, std::shared_ptr<const Mesh> mesh,
                                const std::vector<double>& u0, const std::vector<double>& eps_list,
                                const SweepOptions& opt = {}) {
  if (eps_list.empty()) throw Error(Errc::InvalidParameter, "eps list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0)) throw Error(Errc::InvalidParameter, "eps must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw Error(Errc::InvalidParameter, "eps list must decrease");
  }
  EpsSweepReport rep;
  rep.mesh = mesh;
  std::vector<double> warm;
  for (double eps : eps_list) {
    const SolveResult s = solve_eps(I, mesh, u0, eps, opt.solve, warm.empty() ? nullptr : &warm);
    SweepRecord rec = diagnostics(s.field, I, eps);
    rec.newton_iters = s.newton_iters;
    rec.converged = s.converged;
    rec.residual_norm = s.residual_norm;
    rep.records.push_back(rec);
    warm = s.field.values;
    rep.fields.push_back(warm);
  }
  rep.classification = classify_sweep(rep.records, opt);
  return rep;
}

inline EpsSweepReport eps_sweep(const Integrand& I, const Domain2D& D, const std::function<double(const Point&)>& u0,
                                double h, const std::vector<double>& eps_list, const SweepOptions& opt = {}) {
  auto mesh = std::make_shared<const Mesh>(generate_mesh(D, h));
  return eps_sweep(I, mesh, sample_boundary(*mesh, u0), eps_list, opt);
}

}  // namespace lingrow
