#pragma once

#include <cstdint>
#include <vector>

#include "polyadapt/geometry.hpp"
#include "polyadapt/mesh.hpp"

namespace polyadapt {

struct GeneratorSet {
  std::vector<Vec2> points;  // all strictly inside (0,1)^2
  std::uint64_t seed = 0;
  int grid_n = 0;  // nominal N for an N x N-cell mesh
};

/// n^2 i.i.d. uniform points in (0,1)^2. The seed-to-point mapping is fixed
/// (UniformRng stream, x then y per point) so runs are reproducible.
GeneratorSet random_generators(int n, std::uint64_t seed);

/// Uniform bucket grid over the unit square used to enumerate generator
/// candidates in roughly increasing distance order.
class PointGrid {
 public:
  PointGrid(const std::vector<Vec2>& points, int buckets_per_side);

  int buckets_per_side() const { return nb_; }
  double bucket_size() const { return h_; }

  /// Append the ids stored in buckets at Chebyshev distance `ring` from the
  /// bucket containing p. Returns false when that ring lies entirely outside
  /// the grid (no further rings hold any points).
  bool collect_ring(const Vec2& p, int ring, std::vector<int>& out) const;

 private:
  int nb_ = 1;
  double h_ = 1.0;
  std::vector<int> offsets_;  // CSR over nb_*nb_ buckets
  std::vector<int> ids_;
};

/// Intersect a convex CCW polygon with the half-plane of points at least as
/// close to gi as to gj. When no vertex is cut, the output is a vertex-exact
/// copy of the input, which makes skipping provably redundant clips
/// bit-neutral.
Polygon clip_by_bisector(const Polygon& poly, const Vec2& gi, const Vec2& gj);

/// Voronoi cell of generator i inside the unit square, clipping against
/// bisectors in increasing (distance, index) order with an early exit once
/// the remaining generators are at least twice the cell's covering radius
/// away. Bit-identical to the brute-force version below.
Polygon voronoi_cell(const std::vector<Vec2>& generators, const PointGrid& grid,
                     int i);

/// Reference implementation: clips against every other generator, sorted by
/// (distance, index). Kept for equivalence tests and benchmarks.
Polygon voronoi_cell_bruteforce(const std::vector<Vec2>& generators, int i);

/// Bounded Voronoi tessellation of the unit square: one convex cell per
/// generator, coincident cell corners welded into shared mesh vertices
/// (tolerance 1e-9), boundary tags classified.
PolygonMesh voronoi(const GeneratorSet& gen);
PolygonMesh voronoi_bruteforce(const GeneratorSet& gen);

/// One Lloyd step: every generator moves to the area centroid of its cell.
GeneratorSet lloyd_step(const GeneratorSet& gen);

struct CvtSnapshot {
  int iter = 0;
  double q_ali = 0.0;  // max alignment measure, affine-fit family, identity metric
  double q_eq = 0.0;   // max equidistribution measure, same family
};

struct CvtResult {
  PolygonMesh mesh;
  GeneratorSet generators;
  std::vector<CvtSnapshot> history;  // iterations 0..iters
};

/// Start from n^2 uniform-random generators and run `iters` Lloyd steps.
/// When record_history is set, the affine-fit quality maxima (identity
/// metric, regular reference n-gons) are recorded for every iteration
/// including the initial tessellation.
CvtResult generate_cvt(int n, int iters, std::uint64_t seed,
                       bool record_history = true);

}  // namespace polyadapt
