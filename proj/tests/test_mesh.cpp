#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "lingrow/mesh.hpp"

using namespace lingrow;

namespace {

using Edge = std::pair<int, int>;

std::map<Edge, int> edge_counts(const Mesh& m) {
  std::map<Edge, int> count;
  for (const auto& T : m.triangles) {
    for (int i = 0; i < 3; ++i) {
      const int a = T[i], b = T[(i + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  return count;
}

// Conforming: every edge is shared by two triangles or lies on the boundary,
// and the boundary edges are exactly the consecutive pairs of the loops.
void expect_conforming(const Mesh& m, int euler) {
  const auto count = edge_counts(m);
  std::set<Edge> loop_edges;
  for (const auto& loop : m.boundary_loops) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const int a = loop[i], b = loop[(i + 1) % loop.size()];
      loop_edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  std::size_t boundary_edges = 0;
  for (const auto& [e, n] : count) {
    ASSERT_LE(n, 2);
    if (n == 1) {
      ++boundary_edges;
      EXPECT_TRUE(loop_edges.count(e)) << e.first << "-" << e.second;
      EXPECT_TRUE(m.boundary[e.first] && m.boundary[e.second]);
    }
  }
  EXPECT_EQ(boundary_edges, loop_edges.size());
  std::set<int> on_loops;
  for (const auto& loop : m.boundary_loops) on_loops.insert(loop.begin(), loop.end());
  for (std::size_t v = 0; v < m.num_vertices(); ++v) EXPECT_EQ(m.boundary[v] != 0, on_loops.count(v) == 1) << v;
  const long V = static_cast<long>(m.num_vertices()), E = static_cast<long>(count.size()),
             F = static_cast<long>(m.num_triangles());
  EXPECT_EQ(V - E + F, euler);
}

void expect_positive(const Mesh& m) {
  for (std::size_t t = 0; t < m.num_triangles(); ++t) EXPECT_GT(m.signed_area(t), 0.0) << t;
}

double total_area(const Mesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) a += m.signed_area(t);
  return a;
}

}  // namespace

TEST(Mesh, CoarseDisk) {
  const Mesh m = generate_mesh(Domain2D::disk(1.0), 0.5);
  EXPECT_GE(m.num_triangles(), 4u);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    if (m.boundary[v]) EXPECT_NEAR(std::hypot(m.vertices[v][0], m.vertices[v][1]), 1.0, 1e-14);
  }
  expect_positive(m);
  expect_conforming(m, 1);
}

TEST(Mesh, AnnulusPolar) {
  const Mesh m = generate_mesh(Domain2D::annulus(1.0, 2.0), 0.1);
  expect_positive(m);
  expect_conforming(m, 0);
  EXPECT_EQ(m.boundary_loops.size(), 2u);
  EXPECT_LE(m.h, 1.5 * 0.1);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    const double r = std::hypot(m.vertices[v][0], m.vertices[v][1]);
    const bool on_circle = std::abs(r - 1.0) <= 1e-14 || std::abs(r - 2.0) <= 1e-14;
    EXPECT_EQ(m.boundary[v] != 0, on_circle) << v;
    EXPECT_GE(r, 1.0 - 1e-14);
    EXPECT_LE(r, 2.0 + 1e-14);
  }
  // Inscribed polygons lose area of order h^2.
  EXPECT_NEAR(total_area(m), 3.0 * M_PI, 0.05);
}

TEST(Mesh, DiskSizes) {
  for (double h : {0.3, 0.2, 0.1, 0.05, 0.013}) {
    const Mesh m = generate_mesh(Domain2D::disk(1.0), h);
    EXPECT_LE(m.h, 1.5 * h) << h;
    expect_positive(m);
    expect_conforming(m, 1);
    EXPECT_NEAR(total_area(m), M_PI, 2.0 * h * h * M_PI) << h;
  }
}

TEST(Mesh, UnitSquare) {
  const Mesh m = generate_mesh(Domain2D::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 0.1);
  // area / (h^2 / 2) = 200 triangles for a uniform right-triangle mesh.
  EXPECT_GE(m.num_triangles(), 100u);
  EXPECT_LE(m.num_triangles(), 500u);
  expect_positive(m);
  expect_conforming(m, 1);
  EXPECT_NEAR(total_area(m), 1.0, 1e-12);
  EXPECT_LE(m.h, 1.5 * 0.1);
  ASSERT_EQ(m.boundary_loops.size(), 1u);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    const auto& x = m.vertices[v];
    const double dist = std::min({x[0], x[1], 1.0 - x[0], 1.0 - x[1]});
    EXPECT_EQ(m.boundary[v] != 0, dist <= m.h * m.h * 1e-6) << v;
  }
}

TEST(Mesh, ClockwisePolygonIsReoriented) {
  const Domain2D D = Domain2D::polygon({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  double area2 = 0.0;
  for (std::size_t i = 0; i < D.vertices.size(); ++i) {
    const auto& p = D.vertices[i];
    const auto& q = D.vertices[(i + 1) % D.vertices.size()];
    area2 += p[0] * q[1] - q[0] * p[1];
  }
  EXPECT_GT(area2, 0.0);
  expect_positive(generate_mesh(D, 0.2));
}

TEST(Mesh, RejectsBadDomains) {
  EXPECT_THROW(Domain2D::polygon({{0, 0}, {1, 0}, {0.5, 0.1}, {1, 1}, {0, 1}}), Error);
  EXPECT_THROW(Domain2D::polygon({{0, 0}, {1, 0}}), Error);
  EXPECT_THROW(Domain2D::disk(-1.0), Error);
  EXPECT_THROW(Domain2D::annulus(2.0, 1.0), Error);
  EXPECT_THROW(generate_mesh(Domain2D::disk(1.0), 0.0), Error);
}

TEST(Mesh, TooCoarse) {
  try {
    generate_mesh(Domain2D::polygon({{0, 0}, {1, 0}, {0, 1}}), 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MeshTooCoarse);
  }
  EXPECT_THROW(generate_mesh(Domain2D::disk(1.0), 2.0), Error);
  EXPECT_THROW(generate_mesh(Domain2D::annulus(1.0, 2.0), 1.0), Error);
}

TEST(Mesh, HashIsDeterministic) {
  const Mesh a = generate_mesh(Domain2D::annulus(1.0, 2.0), 0.1);
  const Mesh b = generate_mesh(Domain2D::annulus(1.0, 2.0), 0.1);
  const Mesh c = generate_mesh(Domain2D::annulus(1.0, 2.0), 0.09);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Mesh, Diameter) {
  EXPECT_EQ(Domain2D::disk(1.5).diameter(), 3.0);
  EXPECT_EQ(Domain2D::annulus(1.0, 2.0).diameter(), 4.0);
  EXPECT_NEAR(Domain2D::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}).diameter(), std::sqrt(2.0), 1e-15);
}
