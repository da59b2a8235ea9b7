#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "polyadapt/geometry.hpp"

namespace polyadapt {

/// Vertex classification against the unit-square domain boundary.
/// Side ids: 0 = bottom (y=0), 1 = right (x=1), 2 = top (y=1), 3 = left (x=0).
/// Corner ids: 0 = (0,0), 1 = (1,0), 2 = (1,1), 3 = (0,1).
enum class BoundaryKind { Interior, Side, Corner };

struct BoundaryTag {
  BoundaryKind kind = BoundaryKind::Interior;
  int id = -1;  // side or corner id, -1 for interior

  bool is_interior() const { return kind == BoundaryKind::Interior; }
  bool is_side() const { return kind == BoundaryKind::Side; }
  bool is_corner() const { return kind == BoundaryKind::Corner; }
  bool on_boundary() const { return kind != BoundaryKind::Interior; }
};

/// Tolerance for snapping vertex coordinates onto the unit-square boundary.
inline constexpr double kBoundarySnapTol = 1e-9;

/// Mesh of convex polygonal cells. Cells are CCW vertex-index loops.
/// Instances are treated as immutable once built; sharing across threads
/// for read-only access is safe.
struct PolygonMesh {
  std::vector<Vec2> vertices;
  std::vector<std::vector<int>> cells;
  std::vector<BoundaryTag> boundary;  // per-vertex, same length as vertices

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_cells() const { return cells.size(); }

  Polygon cell_polygon(int cell_id) const {
    Polygon p;
    p.reserve(cells[cell_id].size());
    for (int v : cells[cell_id]) p.push_back(vertices[v]);
    return p;
  }
};

/// Classify vertices against the unit-square boundary by coordinate snapping.
std::vector<BoundaryTag> classify_boundary(const std::vector<Vec2>& vertices,
                                           double tol = kBoundarySnapTol);

/// Exact corner coordinates for a corner id (see BoundaryTag docs).
Vec2 corner_position(int corner_id);

struct MeshDiagnostics {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Check all PolygonMesh invariants: index ranges, loop sizes, CCW
/// orientation, strict convexity, collinearity (relative to the squared cell
/// diameter), and — when expected_area >= 0 — that cell areas sum to the
/// domain area within 1e-10 relative (cells tile without gaps or overlap).
/// Returns violations as data; an empty list means the mesh is valid.
MeshDiagnostics validate_mesh(const PolygonMesh& mesh, double expected_area = -1.0);

double cell_area(const PolygonMesh& mesh, int cell_id);

/// Arithmetic mean of a cell's vertex coordinates (inside for convex cells).
Vec2 arithmetic_center(const PolygonMesh& mesh, int cell_id);

/// Triangular subdivision schemes:
///   A — fan each n-gon from the first vertex of its stored loop (n-2 triangles);
///   B — connect every edge to the cell's arithmetic center (n triangles).
enum class SubdivisionScheme { A, B };

/// Provenance of one subdivision vertex: either a polygon vertex of the
/// source mesh or the auxiliary center of a cell (scheme B only).
struct TriVertexOrigin {
  bool is_center = false;
  int id = -1;  // polygon-vertex id, or cell id when is_center
};

struct TriSubdivision {
  std::vector<Vec2> tri_vertices;  // mesh vertices, then cell centers (scheme B)
  std::vector<std::array<int, 3>> triangles;  // CCW index triples
  std::vector<int> parent;                    // per-triangle parent cell id
  SubdivisionScheme scheme = SubdivisionScheme::A;
  std::vector<TriVertexOrigin> vertex_origin;  // per tri-vertex
  std::size_t n_mesh_vertices = 0;             // leading vertices shared with the mesh

  std::size_t n_triangles() const { return triangles.size(); }
  int center_index(int cell_id) const {
    return static_cast<int>(n_mesh_vertices) + cell_id;
  }
};

/// Subdivide every cell of the mesh. Throws std::runtime_error if a
/// degenerate (non-positive-area) triangle is produced.
TriSubdivision subdivide(const PolygonMesh& mesh, SubdivisionScheme scheme);

/// Triangles covering one convex polygon, as local vertex-index triples into
/// the polygon (plus index n = appended arithmetic center for scheme B).
std::vector<std::array<int, 3>> polygon_subdivision_indices(std::size_t n,
                                                            SubdivisionScheme scheme);

/// JSON mesh document:
///   {"dim": 2, "vertices": [[x, y], ...], "cells": [[i0, i1, ...], ...],
///    "boundary": {...}}   (boundary optional, recomputed on load)
/// Numbers carry 17 significant digits so save/load round trips are
/// bit-exact. Loading validates invariants and throws std::runtime_error
/// with diagnostics on failure.
std::string mesh_to_json(const PolygonMesh& mesh);
PolygonMesh mesh_from_json(const std::string& text);
void save_mesh(const PolygonMesh& mesh, const std::string& path);
PolygonMesh load_mesh(const std::string& path);

/// Format a double with 17 significant digits (shortest form preserving the
/// exact value on round trip).
std::string format_g17(double value);

}  // namespace polyadapt
