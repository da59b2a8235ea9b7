#include <cmath>

#include "doctest.h"
#include "polyadapt/problems.hpp"
#include "polyadapt/rng.hpp"
#include "support.hpp"

using namespace polyadapt;

namespace {

// Validates that -laplacian(u_exact) matches f and that grad_exact matches
// the finite-difference gradient, at random interior sample points.
void check_consistency(const ProblemSpec& p, int samples, double min_origin_dist) {
  UniformRng rng(42);
  const double h = 5e-4;       // Laplacian stencil spacing
  const double hg = 2.5e-4;    // gradient stencil spacing
  double f_scale = 1.0, g_scale = 1.0;
  std::vector<Vec2> points;
  while (points.size() < static_cast<std::size_t>(samples)) {
    const Vec2 x{rng.in_range(2 * h, 1.0 - 2 * h), rng.in_range(2 * h, 1.0 - 2 * h)};
    if (norm(x) < min_origin_dist) continue;
    points.push_back(x);
    f_scale = std::max(f_scale, std::abs(p.f(x)));
    g_scale = std::max(g_scale, norm(p.grad_exact(x)));
  }
  for (const Vec2& x : points) {
    const double lap = testsupport::fd_laplacian4(p.u_exact, x, h);
    CHECK_MESSAGE(std::abs(-lap - p.f(x)) < 1e-5 * f_scale,
                  p.name << " at (" << x.x << ", " << x.y << ")");
    const Vec2 g = testsupport::fd_gradient4(p.u_exact, x, hg);
    CHECK_MESSAGE(dist(g, p.grad_exact(x)) < 1e-5 * g_scale,
                  p.name << " gradient at (" << x.x << ", " << x.y << ")");
  }
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("tanh-front problem is self consistent") {
  const ProblemSpec p = problem_by_name("example1");
  CHECK(p.name == "example1");
  check_consistency(p, 1000, 0.0);
  // Boundary data agrees with the exact solution.
  CHECK(p.g({0.3, 0.0}) == p.u_exact({0.3, 0.0}));
  CHECK(p.g({1.0, 0.7}) == p.u_exact({1.0, 0.7}));
}

TEST_CASE("corner-singular problem is self consistent") {
  const ProblemSpec p = problem_by_name("example2");
  check_consistency(p, 1000, 0.05);
  // The source is identically 1 (the singular part is harmonic).
  UniformRng rng(7);
  for (int i = 0; i < 50; ++i) {
    CHECK(p.f({rng.next(), rng.next()}) == doctest::Approx(1.0).epsilon(1e-14));
  }
  // Finite at the singular corner.
  CHECK(p.u_exact({0.0, 0.0}) == 0.0);
  // Continuity along the negative-x-free axis: approaching (0,0) the
  // solution stays bounded.
  CHECK(std::abs(p.u_exact({1e-12, 0.0})) < 1e-5);
}

TEST_CASE("smooth sine problem is self consistent") {
  const ProblemSpec p = problem_by_name("sine");
  check_consistency(p, 400, 0.0);
  CHECK(p.u_exact({0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(p.g({0.0, 0.25})) < 1e-15);
  CHECK(std::abs(p.g({0.25, 1.0})) < 1e-15);
}

TEST_CASE("unknown problem names are rejected") {
  CHECK_THROWS_AS((void)problem_by_name("example3"), std::runtime_error);
}

}  // TEST_SUITE
