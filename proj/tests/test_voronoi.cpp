#include <cmath>

#include "doctest.h"
#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"
#include "polyadapt/quality.hpp"
#include "polyadapt/voronoi.hpp"
#include "support.hpp"

using namespace polyadapt;

namespace {

double total_area(const PolygonMesh& mesh) {
  double a = 0.0;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) a += cell_area(mesh, static_cast<int>(c));
  return a;
}

}  // namespace

TEST_SUITE("voronoi") {

TEST_CASE("random generators are reproducible and interior") {
  const GeneratorSet a = random_generators(4, 7);
  const GeneratorSet b = random_generators(4, 7);
  REQUIRE(a.points.size() == 16);
  CHECK(a.points == b.points);
  for (const Vec2& p : a.points) {
    CHECK(p.x > 0.0);
    CHECK(p.x < 1.0);
    CHECK(p.y > 0.0);
    CHECK(p.y < 1.0);
  }
  const GeneratorSet c = random_generators(4, 8);
  CHECK(a.points != c.points);
}

TEST_CASE("two generators split the square at the bisector") {
  GeneratorSet gen;
  gen.points = {{0.25, 0.5}, {0.75, 0.5}};
  gen.grid_n = 1;
  const PolygonMesh mesh = voronoi(gen);
  REQUIRE(mesh.n_cells() == 2);
  CHECK(cell_area(mesh, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cell_area(mesh, 1) == doctest::Approx(0.5).epsilon(1e-12));
  for (const Vec2& v : mesh.vertices) {
    CHECK((v.x == 0.0 || v.x == 1.0 || v.x == doctest::Approx(0.5).epsilon(1e-12)));
  }
}

TEST_CASE("four quadrant generators give quarter squares") {
  GeneratorSet gen;
  gen.points = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
  gen.grid_n = 2;
  const PolygonMesh mesh = voronoi(gen);
  REQUIRE(mesh.n_cells() == 4);
  for (int c = 0; c < 4; ++c) {
    CHECK(cell_area(mesh, c) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(mesh.cells[c].size() == 4);
  }
  CHECK(validate_mesh(mesh, 1.0).ok());
}

TEST_CASE("random tessellations are valid and tile the square") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const GeneratorSet gen = random_generators(4, seed);
    const PolygonMesh mesh = voronoi(gen);
    REQUIRE(mesh.n_cells() == 16);
    const MeshDiagnostics diag = validate_mesh(mesh, 1.0);
    CHECK_MESSAGE(diag.ok(), (diag.ok() ? "" : diag.violations.front()));
    CHECK(std::abs(total_area(mesh) - 1.0) < 1e-10);
    // Every generator lies inside its own cell.
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      const Polygon poly = mesh.cell_polygon(static_cast<int>(c));
      CHECK(point_in_convex(poly, gen.points[c], -1e-12));
    }
  }
}

TEST_CASE("grid-accelerated cells match the brute force reference bitwise") {
  for (std::uint64_t seed : {1ull, 11ull}) {
    for (int n : {2, 5}) {
      const GeneratorSet gen = random_generators(n, seed);
      const PolygonMesh fast = voronoi(gen);
      const PolygonMesh slow = voronoi_bruteforce(gen);
      REQUIRE(fast.n_cells() == slow.n_cells());
      CHECK(fast.vertices == slow.vertices);
      CHECK(fast.cells == slow.cells);
      CHECK(mesh_to_json(fast) == mesh_to_json(slow));
    }
  }
}

TEST_CASE("half plane clipping keeps the closer side") {
  const Polygon square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Polygon left = clip_by_bisector(square, {0.25, 0.5}, {0.75, 0.5});
  CHECK(signed_area(left) == doctest::Approx(0.5));
  for (const Vec2& v : left) CHECK(v.x <= 0.5 + 1e-12);
  // A bisector that misses the polygon returns it unchanged.
  const Polygon same = clip_by_bisector(square, {0.5, 0.5}, {5.0, 0.5});
  CHECK(same == square);
}

TEST_CASE("lloyd step fixes centroidal configurations") {
  GeneratorSet gen;
  gen.points = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
  gen.grid_n = 2;
  const GeneratorSet next = lloyd_step(gen);
  for (std::size_t i = 0; i < gen.points.size(); ++i) {
    CHECK(dist(next.points[i], gen.points[i]) < 1e-12);
  }
}

TEST_CASE("lloyd step moves generators to cell centroids") {
  GeneratorSet gen;
  gen.points = {{0.1, 0.5}, {0.9, 0.5}};
  gen.grid_n = 1;
  const GeneratorSet next = lloyd_step(gen);
  CHECK(next.points[0].x == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(next.points[0].y == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(next.points[1].x == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(next.points[1].y == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lloyd iteration descends the quantization energy") {
  GeneratorSet gen = random_generators(4, 5);
  double prev = testsupport::cvt_energy(gen);
  for (int it = 0; it < 10; ++it) {
    gen = lloyd_step(gen);
    const double cur = testsupport::cvt_energy(gen);
    CHECK(cur <= prev + 1e-14);
    prev = cur;
  }
}

TEST_CASE("generate_cvt records history and improves quality") {
  const CvtResult result = generate_cvt(4, 20, 3, true);
  REQUIRE(result.history.size() == 21);
  CHECK(result.history.front().iter == 0);
  CHECK(result.history.back().iter == 20);
  CHECK(validate_mesh(result.mesh, 1.0).ok());
  CHECK(result.mesh.n_cells() == 16);
  CHECK(result.history.back().q_ali < result.history.front().q_ali);
  CHECK(result.history.back().q_eq < result.history.front().q_eq);
  // Without history recording the mesh is identical.
  const CvtResult quiet = generate_cvt(4, 20, 3, false);
  CHECK(quiet.history.empty());
  CHECK(quiet.mesh.vertices == result.mesh.vertices);
}

TEST_CASE("quadrant configuration scores perfect quality") {
  GeneratorSet gen;
  gen.points = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
  gen.grid_n = 2;
  const PolygonMesh mesh = voronoi(gen);
  const MetricField metric = identity_metric(mesh.n_vertices());
  const QualityReport rep = quality_approx1(mesh, regular_references(mesh), metric);
  CHECK(rep.Q_ali == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.Q_eq == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
