#include "polyadapt/voronoi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "polyadapt/metric.hpp"
#include "polyadapt/parallel.hpp"
#include "polyadapt/quality.hpp"
#include "polyadapt/rng.hpp"

namespace polyadapt {

namespace {

Polygon unit_square_polygon() {
  return {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
}

double max_dist2(const Vec2& p, const Polygon& poly) {
  double r2 = 0.0;
  for (const Vec2& v : poly) r2 = std::max(r2, dist2(p, v));
  return r2;
}

// Slack on the security-radius test 4*R^2: generators farther than
// 2R(1+5e-13) cannot cut the cell even after floating-point evaluation of
// the clip predicate, so skipping them is exactly a no-op.
constexpr double kSecuritySlack = 1.0 + 1e-12;

}  // namespace

GeneratorSet random_generators(int n, std::uint64_t seed) {
  if (n < 2) throw std::runtime_error("random_generators: n must be >= 2");
  GeneratorSet gen;
  gen.seed = seed;
  gen.grid_n = n;
  gen.points.reserve(static_cast<std::size_t>(n) * n);
  UniformRng rng(seed);
  for (int k = 0; k < n * n; ++k) {
    const double x = rng.next();
    const double y = rng.next();
    gen.points.push_back({x, y});
  }
  return gen;
}

PointGrid::PointGrid(const std::vector<Vec2>& points, int buckets_per_side) {
  nb_ = std::max(1, buckets_per_side);
  h_ = 1.0 / nb_;
  const std::size_t nbuckets = static_cast<std::size_t>(nb_) * nb_;
  std::vector<int> counts(nbuckets, 0);
  auto bucket_of = [&](const Vec2& p) {
    int bx = std::min(nb_ - 1, std::max(0, static_cast<int>(p.x * nb_)));
    int by = std::min(nb_ - 1, std::max(0, static_cast<int>(p.y * nb_)));
    return static_cast<std::size_t>(by) * nb_ + bx;
  };
  for (const Vec2& p : points) ++counts[bucket_of(p)];
  offsets_.assign(nbuckets + 1, 0);
  for (std::size_t b = 0; b < nbuckets; ++b) offsets_[b + 1] = offsets_[b] + counts[b];
  ids_.resize(points.size());
  std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    ids_[cursor[bucket_of(points[i])]++] = static_cast<int>(i);
  }
}

bool PointGrid::collect_ring(const Vec2& p, int ring, std::vector<int>& out) const {
  const int bx = std::min(nb_ - 1, std::max(0, static_cast<int>(p.x * nb_)));
  const int by = std::min(nb_ - 1, std::max(0, static_cast<int>(p.y * nb_)));
  bool any_in_grid = false;
  auto visit = [&](int cx, int cy) {
    if (cx < 0 || cy < 0 || cx >= nb_ || cy >= nb_) return;
    any_in_grid = true;
    const std::size_t b = static_cast<std::size_t>(cy) * nb_ + cx;
    for (int k = offsets_[b]; k < offsets_[b + 1]; ++k) out.push_back(ids_[k]);
  };
  if (ring == 0) {
    visit(bx, by);
  } else {
    for (int dx = -ring; dx <= ring; ++dx) {
      visit(bx + dx, by - ring);
      visit(bx + dx, by + ring);
    }
    for (int dy = -ring + 1; dy <= ring - 1; ++dy) {
      visit(bx - ring, by + dy);
      visit(bx + ring, by + dy);
    }
  }
  return any_in_grid;
}

Polygon clip_by_bisector(const Polygon& poly, const Vec2& gi, const Vec2& gj) {
  const Vec2 m{0.5 * (gi.x + gj.x), 0.5 * (gi.y + gj.y)};
  const Vec2 u{gj.x - gi.x, gj.y - gi.y};
  const std::size_t n = poly.size();
  Polygon out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2& a = poly[k];
    const Vec2& b = poly[(k + 1) % n];
    const double sa = (a.x - m.x) * u.x + (a.y - m.y) * u.y;
    const double sb = (b.x - m.x) * u.x + (b.y - m.y) * u.y;
    if (sa <= 0.0) out.push_back(a);
    if ((sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0)) {
      const double t = sa / (sa - sb);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

Polygon voronoi_cell(const std::vector<Vec2>& generators, const PointGrid& grid,
                     int i) {
  const Vec2 gi = generators[i];
  Polygon poly = unit_square_polygon();
  double r2 = max_dist2(gi, poly);

  std::vector<std::pair<double, int>> cands;  // (squared distance, id), sorted
  std::size_t pos = 0;
  int ring = -1;
  double covered2 = 0.0;  // every uncollected generator is at least this far (squared)
  bool exhausted = false;
  std::vector<int> scratch;

  auto collect_next_ring = [&]() {
    ++ring;
    scratch.clear();
    if (!grid.collect_ring(gi, ring, scratch)) {
      exhausted = true;
      covered2 = std::numeric_limits<double>::infinity();
      return;
    }
    const std::size_t old = cands.size();
    for (int j : scratch) {
      if (j != i) cands.emplace_back(dist2(generators[j], gi), j);
    }
    std::sort(cands.begin() + old, cands.end());
    std::inplace_merge(cands.begin(), cands.begin() + old, cands.end());
    const double d = static_cast<double>(ring) * grid.bucket_size();
    covered2 = d * d;
  };

  while (true) {
    const double stop2 = 4.0 * r2 * kSecuritySlack;
    if (!exhausted && covered2 < stop2 &&
        (pos == cands.size() || cands[pos].first >= covered2)) {
      collect_next_ring();
      continue;
    }
    if (pos == cands.size() || cands[pos].first >= stop2) break;
    if (cands[pos].first == 0.0) {
      throw std::runtime_error("voronoi: duplicate generators");
    }
    const int j = cands[pos++].second;
    poly = clip_by_bisector(poly, gi, generators[j]);
    if (poly.size() < 3) {
      throw std::runtime_error("voronoi: cell collapsed while clipping");
    }
    r2 = max_dist2(gi, poly);
  }
  return poly;
}

Polygon voronoi_cell_bruteforce(const std::vector<Vec2>& generators, int i) {
  const Vec2 gi = generators[i];
  std::vector<std::pair<double, int>> order;
  order.reserve(generators.size() - 1);
  for (std::size_t j = 0; j < generators.size(); ++j) {
    if (static_cast<int>(j) == i) continue;
    order.emplace_back(dist2(generators[j], gi), static_cast<int>(j));
  }
  std::sort(order.begin(), order.end());

  Polygon poly = unit_square_polygon();
  for (const auto& [d2, j] : order) {
    if (d2 == 0.0) throw std::runtime_error("voronoi: duplicate generators");
    poly = clip_by_bisector(poly, gi, generators[j]);
    if (poly.size() < 3) {
      throw std::runtime_error("voronoi: cell collapsed while clipping");
    }
  }
  return poly;
}

namespace {

// Weld coincident polygon corners (tolerance 1e-9) into shared mesh
// vertices. Representatives are first occurrences in scan order, so the
// result does not depend on thread count or hash iteration order.
class VertexWelder {
 public:
  explicit VertexWelder(double tol) : tol2_(tol * tol) {}

  int find_or_add(const Vec2& p) {
    const long long bx = static_cast<long long>(std::floor(p.x / kBucket));
    const long long by = static_cast<long long>(std::floor(p.y / kBucket));
    int best = -1;
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = buckets_.find(key(bx + dx, by + dy));
        if (it == buckets_.end()) continue;
        for (int id : it->second) {
          if (dist2(reps_[id], p) <= tol2_ && (best < 0 || id < best)) best = id;
        }
      }
    }
    if (best >= 0) return best;
    const int id = static_cast<int>(reps_.size());
    reps_.push_back(p);
    buckets_[key(bx, by)].push_back(id);
    return id;
  }

  const std::vector<Vec2>& representatives() const { return reps_; }

 private:
  static constexpr double kBucket = 1e-6;
  static long long key(long long bx, long long by) { return bx * 4000037LL + by; }

  double tol2_;
  std::vector<Vec2> reps_;
  std::unordered_map<long long, std::vector<int>> buckets_;
};

PolygonMesh mesh_from_cell_polygons(const std::vector<Polygon>& cell_polys) {
  VertexWelder welder(1e-9);
  PolygonMesh mesh;
  mesh.cells.reserve(cell_polys.size());
  for (const Polygon& poly : cell_polys) {
    std::vector<int> loop;
    loop.reserve(poly.size());
    for (const Vec2& p : poly) {
      const int id = welder.find_or_add(p);
      if (!loop.empty() && loop.back() == id) continue;  // welded micro-edge
      loop.push_back(id);
    }
    while (loop.size() > 1 && loop.front() == loop.back()) loop.pop_back();
    if (loop.size() < 3) {
      throw std::runtime_error("voronoi: degenerate cell after welding");
    }
    mesh.cells.push_back(std::move(loop));
  }
  mesh.vertices = welder.representatives();
  mesh.boundary = classify_boundary(mesh.vertices);
  return mesh;
}

std::vector<Polygon> clip_all_cells(const GeneratorSet& gen, bool bruteforce) {
  std::vector<Polygon> polys(gen.points.size());
  if (bruteforce) {
    parallel_for(gen.points.size(), [&](std::size_t i) {
      polys[i] = voronoi_cell_bruteforce(gen.points, static_cast<int>(i));
    });
  } else {
    const int nb = std::max(1, static_cast<int>(std::floor(
                                   std::sqrt(static_cast<double>(gen.points.size())))));
    const PointGrid grid(gen.points, nb);
    parallel_for(gen.points.size(), [&](std::size_t i) {
      polys[i] = voronoi_cell(gen.points, grid, static_cast<int>(i));
    });
  }
  return polys;
}

}  // namespace

PolygonMesh voronoi(const GeneratorSet& gen) {
  return mesh_from_cell_polygons(clip_all_cells(gen, false));
}

PolygonMesh voronoi_bruteforce(const GeneratorSet& gen) {
  return mesh_from_cell_polygons(clip_all_cells(gen, true));
}

GeneratorSet lloyd_step(const GeneratorSet& gen) {
  const std::vector<Polygon> polys = clip_all_cells(gen, false);
  GeneratorSet next = gen;
  parallel_for(polys.size(), [&](std::size_t i) {
    next.points[i] = polygon_centroid(polys[i]);
  });
  return next;
}

CvtResult generate_cvt(int n, int iters, std::uint64_t seed, bool record_history) {
  if (n < 2) throw std::runtime_error("generate_cvt: n must be >= 2");
  if (iters < 0) throw std::runtime_error("generate_cvt: iters must be >= 0");

  GeneratorSet gens = random_generators(n, seed);
  CvtResult result;
  for (int it = 0;; ++it) {
    const std::vector<Polygon> polys = clip_all_cells(gens, false);
    PolygonMesh mesh = mesh_from_cell_polygons(polys);
    if (record_history) {
      const MetricField id = identity_metric(mesh.n_vertices());
      const QualityReport rep = quality_approx1(mesh, regular_references(mesh), id);
      result.history.push_back({it, rep.Q_ali, rep.Q_eq});
    }
    if (it == iters) {
      result.mesh = std::move(mesh);
      break;
    }
    parallel_for(polys.size(), [&](std::size_t i) {
      gens.points[i] = polygon_centroid(polys[i]);
    });
  }
  result.generators = std::move(gens);
  return result;
}

}  // namespace polyadapt
