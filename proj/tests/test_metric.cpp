#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"
#include "polyadapt/rng.hpp"
#include "polyadapt/voronoi.hpp"
#include "support.hpp"

using namespace polyadapt;

namespace {

std::vector<double> sample(const PolygonMesh& mesh, double (*f)(double, double)) {
  std::vector<double> v(mesh.n_vertices());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(mesh.vertices[i].x, mesh.vertices[i].y);
  return v;
}

}  // namespace

TEST_SUITE("metric") {

TEST_CASE("symmetric eigendecomposition") {
  const EigenPair2 e = sym_eig({0.0, 2.0, 0.0});
  CHECK(e.lambda1 == doctest::Approx(2.0));
  CHECK(e.lambda2 == doctest::Approx(-2.0));
  CHECK(std::abs(dot(e.v1, e.v2)) < 1e-14);
  CHECK(norm(e.v1) == doctest::Approx(1.0));
  // Eigenvector direction check: M v1 = lambda1 v1.
  const Vec2 mv{2.0 * e.v1.y, 2.0 * e.v1.x};
  CHECK(dist(mv, e.v1 * e.lambda1) < 1e-12);

  const EigenPair2 d = sym_eig({5.0, 0.0, 3.0});
  CHECK(d.lambda1 == doctest::Approx(5.0));
  CHECK(d.lambda2 == doctest::Approx(3.0));
}

TEST_CASE("absolute eigenvalue map") {
  const SpdTensor2 a = abs_eig({4.0, 0.0, -1.0});
  CHECK(a.m11 == doctest::Approx(4.0));
  CHECK(a.m12 == doctest::Approx(0.0));
  CHECK(a.m22 == doctest::Approx(1.0));

  const SpdTensor2 z = abs_eig({0.0, 0.0, 0.0});
  CHECK(z.m11 == doctest::Approx(0.0));
  CHECK(z.m22 == doctest::Approx(0.0));

  const SpdTensor2 s = abs_eig({0.0, 2.0, 0.0});  // eigenvalues +-2
  CHECK(s.m11 == doctest::Approx(2.0));
  CHECK(std::abs(s.m12) < 1e-14);
  CHECK(s.m22 == doctest::Approx(2.0));
}

TEST_CASE("spd check") {
  CHECK(is_spd({1.0, 0.0, 1.0}));
  CHECK(is_spd({2.0, 1.0, 2.0}));
  CHECK_FALSE(is_spd({1.0, 2.0, 1.0}));   // det < 0
  CHECK_FALSE(is_spd({-1.0, 0.0, -1.0}));
  CHECK_FALSE(is_spd({0.0, 0.0, 0.0}));
}

TEST_CASE("tensor averaging") {
  MetricField field;
  field.tensors = {{1.0, 0.0, 1.0}, {3.0, 0.0, 1.0}};
  const SpdTensor2 avg = average_metric(field, {0, 1});
  CHECK(avg.m11 == doctest::Approx(2.0));
  CHECK(avg.m22 == doctest::Approx(1.0));

  // Analytic field diag(1+x, 1) averaged over a triangle's vertices.
  PolygonMesh tri;
  tri.vertices = {{0, 0}, {1, 0}, {0, 1}};
  tri.cells = {{0, 1, 2}};
  tri.boundary = classify_boundary(tri.vertices);
  MetricField analytic;
  for (const Vec2& v : tri.vertices) analytic.tensors.push_back({1.0 + v.x, 0.0, 1.0});
  const SpdTensor2 m = average_metric(analytic, tri.cells[0]);
  CHECK(m.m11 == doctest::Approx(4.0 / 3.0));
  CHECK(m.m22 == doctest::Approx(1.0));
}

TEST_CASE("hessian recovery is exact on quadratics") {
  const CvtResult cvt = generate_cvt(6, 20, 2, false);
  for (const PolygonMesh& mesh : {testsupport::grid_mesh(6), cvt.mesh}) {
    const HessianRecovery r1 =
        recover_hessian(mesh, sample(mesh, [](double x, double y) { return x * x + y * y; }));
    for (const SpdTensor2& h : r1.hessians) {
      CHECK(std::abs(h.m11 - 2.0) < 1e-9);
      CHECK(std::abs(h.m12) < 1e-9);
      CHECK(std::abs(h.m22 - 2.0) < 1e-9);
    }
    const HessianRecovery r2 =
        recover_hessian(mesh, sample(mesh, [](double x, double y) { return x * y; }));
    for (const SpdTensor2& h : r2.hessians) {
      CHECK(std::abs(h.m11) < 1e-9);
      CHECK(std::abs(h.m12 - 1.0) < 1e-9);
      CHECK(std::abs(h.m22) < 1e-9);
    }
    const HessianRecovery r3 = recover_hessian(
        mesh, sample(mesh, [](double x, double y) { return 1.0 + 2.0 * x - y + 3.0 * x * x +
                                                           4.0 * x * y + 5.0 * y * y; }));
    for (const SpdTensor2& h : r3.hessians) {
      CHECK(std::abs(h.m11 - 6.0) < 1e-9);
      CHECK(std::abs(h.m12 - 4.0) < 1e-9);
      CHECK(std::abs(h.m22 - 10.0) < 1e-9);
    }
  }
}

TEST_CASE("hessian recovery approximates smooth cubics") {
  const CvtResult cvt = generate_cvt(16, 30, 1, false);
  const PolygonMesh& mesh = cvt.mesh;
  const HessianRecovery rec =
      recover_hessian(mesh, sample(mesh, [](double x, double) { return x * x * x; }));
  // At interior vertices near x = 0.5 the recovered h11 approximates 6x = 3.
  int checked = 0;
  for (std::size_t i = 0; i < mesh.n_vertices(); ++i) {
    if (!mesh.boundary[i].is_interior()) continue;
    if (std::abs(mesh.vertices[i].x - 0.5) > 0.05) continue;
    CHECK(std::abs(rec.hessians[i].m11 - 6.0 * mesh.vertices[i].x) < 0.75);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("regularization parameter closed forms") {
  const PolygonMesh mesh = testsupport::grid_mesh(4);
  const double expected = std::pow(2.0, 1.5) - 1.0;

  std::vector<SpdTensor2> ident(mesh.n_vertices(), SpdTensor2::identity());
  const AlphaResult a1 = solve_alpha(ident, mesh);
  CHECK_FALSE(a1.uniform_fallback);
  CHECK(std::abs(a1.alpha - expected) < 1e-9);

  std::vector<SpdTensor2> four(mesh.n_vertices(), SpdTensor2{4.0, 0.0, 4.0});
  const AlphaResult a4 = solve_alpha(four, mesh);
  CHECK(std::abs(a4.alpha - 4.0 * expected) < 1e-8);

  std::vector<SpdTensor2> zero(mesh.n_vertices(), SpdTensor2{0.0, 0.0, 0.0});
  const AlphaResult a0 = solve_alpha(zero, mesh);
  CHECK(a0.uniform_fallback);
  CHECK(a0.alpha == doctest::Approx(1.0));
}

TEST_CASE("metric construction from hessians") {
  std::vector<SpdTensor2> zero(4, SpdTensor2{0.0, 0.0, 0.0});
  const MetricField l2_id = build_metric(zero, 1.0, MetricNorm::L2);
  for (const SpdTensor2& t : l2_id.tensors) {
    CHECK(t.m11 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.m22 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(t.m12) < 1e-14);
  }

  std::vector<SpdTensor2> aniso(1, SpdTensor2{3.0, 0.0, 0.0});
  const MetricField l2 = build_metric(aniso, 1.0, MetricNorm::L2);
  CHECK(l2.tensors[0].m11 == doctest::Approx(std::pow(4.0, -1.0 / 6.0) * 4.0).epsilon(1e-12));
  CHECK(l2.tensors[0].m22 == doctest::Approx(std::pow(4.0, -1.0 / 6.0)).epsilon(1e-12));
  CHECK(l2.provenance == MetricProvenance::RecoveredL2);

  const MetricField h1 = build_metric(aniso, 1.0, MetricNorm::H1);
  CHECK(h1.tensors[0].m11 == doctest::Approx(std::pow(4.0, 0.25) * 4.0).epsilon(1e-12));
  CHECK(h1.tensors[0].m22 == doctest::Approx(std::pow(4.0, 0.25)).epsilon(1e-12));
  CHECK(h1.provenance == MetricProvenance::RecoveredH1);
}

TEST_CASE("metric pipeline on quadratic data is spatially uniform") {
  const PolygonMesh mesh = testsupport::grid_mesh(5);
  const SolutionMetric sm = metric_from_solution(
      mesh, sample(mesh, [](double x, double y) { return x * x + y * y; }), MetricNorm::L2);
  REQUIRE(sm.field.tensors.size() == mesh.n_vertices());
  CHECK_FALSE(sm.alpha.uniform_fallback);
  const SpdTensor2& first = sm.field.tensors.front();
  for (const SpdTensor2& t : sm.field.tensors) {
    CHECK(std::abs(t.m11 - first.m11) < 1e-8);
    CHECK(std::abs(t.m12 - first.m12) < 1e-8);
    CHECK(std::abs(t.m22 - first.m22) < 1e-8);
    CHECK(is_spd(t));
  }
}

TEST_CASE("metric JSON round trip and validation") {
  MetricField field;
  UniformRng rng(9);
  for (int i = 0; i < 7; ++i) field.tensors.push_back(testsupport::random_spd(rng, 0.1, 10.0));
  const std::string text = metric_to_json(field);
  const MetricField back = metric_from_json(text);
  REQUIRE(back.tensors.size() == field.tensors.size());
  for (std::size_t i = 0; i < field.tensors.size(); ++i) {
    CHECK(back.tensors[i].m11 == field.tensors[i].m11);
    CHECK(back.tensors[i].m12 == field.tensors[i].m12);
    CHECK(back.tensors[i].m22 == field.tensors[i].m22);
  }
  CHECK_THROWS_AS((void)metric_from_json("{\"tensors\": [[1.0, 5.0, 1.0]]}"),
                  std::runtime_error);  // indefinite tensor
  CHECK_THROWS_AS((void)metric_from_json("{}"), std::runtime_error);

  const std::string dir = testsupport::make_temp_dir("metric");
  save_metric(field, dir + "/m.json");
  const MetricField loaded = load_metric(dir + "/m.json");
  CHECK(loaded.tensors.size() == field.tensors.size());
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
