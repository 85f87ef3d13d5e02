#pragma once

// Two-dimensional domains of the built-in catalog and their triangulations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "lingrow/error.hpp"

namespace lingrow {

using Point = std::array<double, 2>;

enum class DomainKind { Disk, Annulus, ConvexPolygon };

inline std::string_view to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Disk: return "disk";
    case DomainKind::Annulus: return "annulus";
    case DomainKind::ConvexPolygon: return "convex_polygon";
  }
  return "unknown";
}

struct Domain2D {
  DomainKind kind = DomainKind::Disk;
  double radius = 1.0;              // disk
  double r_in = 1.0, r_out = 2.0;   // annulus
  std::vector<Point> vertices;      // convex polygon, counterclockwise
  double exterior_ball_radius = 0.0;

  static Domain2D disk(double R) {
    if (!(R > 0.0)) throw Error(Errc::InvalidParameter, "disk radius must be positive");
    Domain2D D;
    D.kind = DomainKind::Disk;
    D.radius = R;
    D.exterior_ball_radius = R;
    return D;
  }

  static Domain2D annulus(double r_in, double r_out) {
    if (!(r_in > 0.0 && r_in < r_out)) throw Error(Errc::InvalidParameter, "need 0 < r_in < r_out");
    Domain2D D;
    D.kind = DomainKind::Annulus;
    D.r_in = r_in;
    D.r_out = r_out;
    D.exterior_ball_radius = 0.5 * r_in;
    return D;
  }

  /// Convex polygon; clockwise input is reoriented. Any radius works for
  /// the exterior ball of a convex set, `ball_radius` fixes the one used.
  static Domain2D polygon(std::vector<Point> verts, double ball_radius = 1.0) {
    const std::size_t n = verts.size();
    if (n < 3) throw Error(Errc::InvalidParameter, "polygon needs at least 3 vertices");
    double area2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = verts[i];
      const Point& q = verts[(i + 1) % n];
      area2 += p[0] * q[1] - q[0] * p[1];
    }
    if (area2 == 0.0) throw Error(Errc::InvalidParameter, "degenerate polygon");
    if (area2 < 0.0) std::reverse(verts.begin(), verts.end());
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = verts[i];
      const Point& q = verts[(i + 1) % n];
      const Point& r = verts[(i + 2) % n];
      const double cross = (q[0] - p[0]) * (r[1] - q[1]) - (q[1] - p[1]) * (r[0] - q[0]);
      if (!(cross > 0.0)) throw Error(Errc::InvalidParameter, "polygon is not strictly convex");
    }
    if (!(ball_radius > 0.0)) throw Error(Errc::InvalidParameter, "ball radius must be positive");
    Domain2D D;
    D.kind = DomainKind::ConvexPolygon;
    D.vertices = std::move(verts);
    D.exterior_ball_radius = ball_radius;
    return D;
  }

  double diameter() const {
    switch (kind) {
      case DomainKind::Disk: return 2.0 * radius;
      case DomainKind::Annulus: return 2.0 * r_out;
      case DomainKind::ConvexPolygon: {
        double d = 0.0;
        for (const Point& p : vertices) {
          for (const Point& q : vertices) d = std::max(d, std::hypot(p[0] - q[0], p[1] - q[1]));
        }
        return d;
      }
    }
    return 0.0;
  }
};

struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<char> boundary;
  /// Closed boundary loops, each listed once without repeating the start.
  std::vector<std::vector<int>> boundary_loops;
  double h = 0.0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double signed_area(std::size_t t) const {
    const auto& T = triangles[t];
    const Point& a = vertices[T[0]];
    const Point& b = vertices[T[1]];
    const Point& c = vertices[T[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
  }

  /// FNV-1a over the vertex coordinates and triangle indices.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
      const auto* p = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
      }
    };
    for (const Point& p : vertices) mix(p.data(), sizeof(double) * 2);
    for (const auto& t : triangles) mix(t.data(), sizeof(int) * 3);
    return h;
  }
};

namespace detail {

inline void finalize_mesh(Mesh& m) {
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    if (m.signed_area(t) < 0.0) std::swap(m.triangles[t][1], m.triangles[t][2]);
  }
  double h = 0.0;
  for (const auto& T : m.triangles) {
    for (int i = 0; i < 3; ++i) {
      const Point& a = m.vertices[T[i]];
      const Point& b = m.vertices[T[(i + 1) % 3]];
      h = std::max(h, std::hypot(a[0] - b[0], a[1] - b[1]));
    }
  }
  m.h = h;
  std::size_t interior = 0;
  for (char b : m.boundary) interior += b ? 0 : 1;
  if (interior < 3) throw Error(Errc::MeshTooCoarse, "fewer than 3 interior vertices");
}

inline std::vector<int> add_ring(Mesh& m, double rho, int n, double phase, bool on_boundary) {
  std::vector<int> ids(n);
  for (int j = 0; j < n; ++j) {
    const double th = phase + 2.0 * std::numbers::pi * j / n;
    ids[j] = static_cast<int>(m.vertices.size());
    m.vertices.push_back({rho * std::cos(th), rho * std::sin(th)});
    m.boundary.push_back(on_boundary ? 1 : 0);
  }
  return ids;
}

/// Triangulates the strip between two concentric rings by walking both
/// in angle order and always advancing the ring whose next vertex comes first.
inline void zip_rings(Mesh& m, const std::vector<int>& inner, double phase_in, const std::vector<int>& outer,
                      double phase_out) {
  const int a = static_cast<int>(inner.size()), b = static_cast<int>(outer.size());
  auto angle = [](int j, int n, double phase) { return phase + 2.0 * std::numbers::pi * j / n; };
  int i = 0, o = 0;
  while (i < a || o < b) {
    const double next_in = angle(i + 1, a, phase_in);
    const double next_out = angle(o + 1, b, phase_out);
    const int ci = inner[i % a], co = outer[o % b];
    if (o >= b || (i < a && next_in <= next_out)) {
      m.triangles.push_back({ci, inner[(i + 1) % a], co});
      ++i;
    } else {
      m.triangles.push_back({ci, outer[(o + 1) % b], co});
      ++o;
    }
  }
}

inline Mesh mesh_disk(double R, double h) {
  Mesh m;
  // Spacing 0.8 h keeps the zipped diagonals within 1.5 h.
  const double step = 0.8 * h;
  const int nr = std::max(1, static_cast<int>(std::ceil(R / step)));
  m.vertices.push_back({0.0, 0.0});
  m.boundary.push_back(0);
  std::vector<int> prev;
  double prev_phase = 0.0;
  for (int k = 1; k <= nr; ++k) {
    const double rho = R * k / nr;
    const int n = std::max(6, static_cast<int>(std::ceil(2.0 * std::numbers::pi * rho / step)));
    const double phase = 0.0;
    auto ring = add_ring(m, rho, n, phase, k == nr);
    if (k == 1) {
      for (int j = 0; j < n; ++j) m.triangles.push_back({0, ring[j], ring[(j + 1) % n]});
    } else {
      zip_rings(m, prev, prev_phase, ring, phase);
    }
    if (k == nr) m.boundary_loops.push_back(ring);
    prev = std::move(ring);
    prev_phase = phase;
  }
  finalize_mesh(m);
  return m;
}

inline Mesh mesh_annulus(double r_in, double r_out, double h) {
  Mesh m;
  const int nr = std::max(1, static_cast<int>(std::ceil((r_out - r_in) / h)));
  const int nt = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r_out / h)));
  std::vector<std::vector<int>> rings;
  for (int k = 0; k <= nr; ++k) {
    const double rho = k == nr ? r_out : r_in + (r_out - r_in) * k / nr;
    rings.push_back(add_ring(m, rho, nt, 0.0, k == 0 || k == nr));
  }
  for (int k = 0; k < nr; ++k) {
    for (int j = 0; j < nt; ++j) {
      const int a = rings[k][j], b = rings[k][(j + 1) % nt];
      const int c = rings[k + 1][(j + 1) % nt], d = rings[k + 1][j];
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }
  m.boundary_loops.push_back(rings.front());
  m.boundary_loops.push_back(rings.back());
  finalize_mesh(m);
  return m;
}

/// Fan from the centroid, each fan triangle split uniformly into n^2 pieces.
inline Mesh mesh_polygon(const std::vector<Point>& verts, double h) {
  const std::size_t nv = verts.size();
  Point c{0.0, 0.0};
  for (const Point& p : verts) {
    c[0] += p[0] / nv;
    c[1] += p[1] / nv;
  }
  double longest = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    const Point& p = verts[i];
    const Point& q = verts[(i + 1) % nv];
    longest = std::max({longest, std::hypot(q[0] - p[0], q[1] - p[1]), std::hypot(p[0] - c[0], p[1] - c[1])});
  }
  const int n = std::max(1, static_cast<int>(std::ceil(longest / h)));

  Mesh m;
  // Vertex (i, a, b) = c + (a/n)(v_i - c) + (b/n)(v_{i+1} - c); the spoke
  // a = 0 of fan i is the spoke b = 0 of fan i + 1.
  std::map<std::array<int, 3>, int> ids;
  auto canonical = [&](int i, int a, int b) -> std::array<int, 3> {
    if (a == 0 && b == 0) return {0, 0, 0};
    if (a == 0) return {static_cast<int>((i + 1) % nv), b, 0};
    return {i, a, b};
  };
  auto vertex = [&](int i, int a, int b) {
    const auto key = canonical(i, a, b);
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    const Point& p = verts[key[0]];
    const Point& q = verts[(key[0] + 1) % nv];
    const double s = static_cast<double>(key[1]) / n, t = static_cast<double>(key[2]) / n;
    Point x;
    if (key[1] + key[2] == n) {
      // Boundary points are interpolated along the edge itself.
      x = {p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
    } else {
      x = {c[0] + s * (p[0] - c[0]) + t * (q[0] - c[0]), c[1] + s * (p[1] - c[1]) + t * (q[1] - c[1])};
    }
    const int id = static_cast<int>(m.vertices.size());
    m.vertices.push_back(x);
    m.boundary.push_back(key[1] + key[2] == n ? 1 : 0);
    ids.emplace(key, id);
    return id;
  };
  for (std::size_t i = 0; i < nv; ++i) {
    const int fi = static_cast<int>(i);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; a + b < n; ++b) {
        m.triangles.push_back({vertex(fi, a, b), vertex(fi, a + 1, b), vertex(fi, a, b + 1)});
        if (a + b + 2 <= n) {
          m.triangles.push_back({vertex(fi, a + 1, b), vertex(fi, a + 1, b + 1), vertex(fi, a, b + 1)});
        }
      }
    }
  }
  std::vector<int> loop;
  for (std::size_t i = 0; i < nv; ++i) {
    for (int b = 0; b < n; ++b) loop.push_back(vertex(static_cast<int>(i), n - b, b));
  }
  m.boundary_loops.push_back(loop);
  finalize_mesh(m);
  return m;
}

}  // namespace detail

/// Disk and annulus meshes are polar with boundary vertices on the circles;
/// polygons use a subdivided centroid fan.
inline Mesh generate_mesh(const Domain2D& D, double h_target) {
  if (!(h_target > 0.0)) throw Error(Errc::InvalidParameter, "mesh size must be positive");
  switch (D.kind) {
    case DomainKind::Disk: return detail::mesh_disk(D.radius, h_target);
    case DomainKind::Annulus: return detail::mesh_annulus(D.r_in, D.r_out, h_target);
    case DomainKind::ConvexPolygon: return detail::mesh_polygon(D.vertices, h_target);
  }
  throw Error(Errc::InvalidParameter, "unknown domain kind");
}

}  // namespace lingrow
