// Timing harness for the performance-sensitive kernels. Each section runs a
// parallel kernel against its serial reference (same code path capped at one
// thread, or the brute-force algorithm for the tessellation) and verifies
// that the outputs agree before printing the timings.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "polyadapt/fem.hpp"
#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"
#include "polyadapt/mmpde.hpp"
#include "polyadapt/parallel.hpp"
#include "polyadapt/problems.hpp"
#include "polyadapt/quality.hpp"
#include "polyadapt/voronoi.hpp"

using namespace polyadapt;
using Clock = std::chrono::steady_clock;

namespace {

double time_once(const std::function<void()>& body) {
  const auto start = Clock::now();
  body();
  return std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - start)
      .count();
}

double time_best_of(int reps, const std::function<void()>& body) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) best = std::min(best, time_once(body));
  return best;
}

void print_row(const std::string& label, double serial, double parallel) {
  std::printf("%-38s %10.4f s %10.4f s %8.2fx\n", label.c_str(), serial, parallel,
              serial / parallel);
}

bool g_mismatch = false;

void check(bool ok, const std::string& what) {
  if (!ok) {
    std::printf("MISMATCH: %s\n", what.c_str());
    g_mismatch = true;
  }
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", (set_max_threads(0), max_threads()));
  std::printf("%-38s %12s %12s %9s\n", "kernel", "serial", "parallel", "speedup");

  // Bounded Voronoi tessellation: bucket-grid candidate enumeration vs the
  // all-pairs reference. Single-threaded on both sides; this compares the
  // algorithms, not the thread count.
  {
    const GeneratorSet gen = random_generators(40, 12345);
    PolygonMesh fast_mesh, slow_mesh;
    set_max_threads(1);
    const double t_slow = time_best_of(2, [&] { slow_mesh = voronoi_bruteforce(gen); });
    const double t_fast = time_best_of(2, [&] { fast_mesh = voronoi(gen); });
    check(fast_mesh.vertices == slow_mesh.vertices && fast_mesh.cells == slow_mesh.cells,
          "grid-accelerated tessellation differs from the reference");
    print_row("voronoi 1600 generators (grid vs ref)", t_slow, t_fast);
  }

  const CvtResult cvt = generate_cvt(48, 30, 7, false);
  const PolygonMesh& mesh = cvt.mesh;

  // Lloyd iteration (cell construction + centroids), 1 thread vs all.
  {
    GeneratorSet g1, gn;
    set_max_threads(1);
    const double t1 = time_best_of(2, [&] { g1 = lloyd_step(cvt.generators); });
    set_max_threads(0);
    const double tn = time_best_of(2, [&] { gn = lloyd_step(cvt.generators); });
    check(g1.points == gn.points, "Lloyd step depends on the thread count");
    print_row("lloyd step, 2304 generators", t1, tn);
  }

  // Quality measurement across the three families.
  MetricField metric;
  metric.provenance = MetricProvenance::Analytic;
  for (const Vec2& v : mesh.vertices) {
    metric.tensors.push_back({1.0 + 3.0 * v.x * v.x, 0.5 * v.x * v.y, 1.0 + 2.0 * v.y * v.y});
  }
  {
    const std::vector<Polygon> refs = regular_references(mesh);
    QualityReport r1, rn;
    set_max_threads(1);
    const double t1 = time_best_of(3, [&] {
      r1 = quality_approx1(mesh, refs, metric);
      quality_approx2(mesh, refs, metric);
      quality_approx3(mesh, metric);
    });
    set_max_threads(0);
    const double tn = time_best_of(3, [&] {
      rn = quality_approx1(mesh, refs, metric);
      quality_approx2(mesh, refs, metric);
      quality_approx3(mesh, metric);
    });
    check(r1.q_ali == rn.q_ali && r1.Q_eq == rn.Q_eq,
          "quality measures depend on the thread count");
    print_row("quality, 3 families, 2304 cells", t1, tn);
  }

  // Movement velocity assembly on the subdivision of the same mesh.
  {
    const TriSubdivision sub = subdivide(mesh, SubdivisionScheme::B);
    const MovingMeshState state =
        make_state(mesh, metric, sub.tri_vertices, 1.0 / 300.0, 1.0);
    std::vector<Vec2> v1, vn;
    auto run = [&](std::vector<Vec2>* out) {
      for (int r = 0; r < 10; ++r) *out = assemble_velocity(state, state.xi_ref);
    };
    set_max_threads(1);
    const double t1 = time_best_of(2, [&] { run(&v1); });
    set_max_threads(0);
    const double tn = time_best_of(2, [&] { run(&vn); });
    check(v1 == vn, "velocity assembly depends on the thread count");
    print_row("velocity assembly x10, 13k triangles", t1, tn);
  }

  // Stiffness/load assembly for the Poisson solve.
  {
    const ProblemSpec sine = problem_by_name("sine");
    PoissonSystem s1, sn;
    set_max_threads(1);
    const double t1 = time_best_of(2, [&] { s1 = assemble_poisson(mesh, sine); });
    set_max_threads(0);
    const double tn = time_best_of(2, [&] { sn = assemble_poisson(mesh, sine); });
    check(s1.value == sn.value && s1.rhs == sn.rhs,
          "system assembly depends on the thread count");
    print_row("poisson assembly, 2304 cells", t1, tn);
  }

  set_max_threads(0);
  if (g_mismatch) {
    std::printf("\nresult mismatch between serial and parallel runs\n");
    return 1;
  }
  std::printf("\nall kernels agree between serial and parallel runs\n");
  return 0;
}
