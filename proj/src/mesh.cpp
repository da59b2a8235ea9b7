#include "polyadapt/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace polyadapt {

std::vector<BoundaryTag> classify_boundary(const std::vector<Vec2>& vertices,
                                           double tol) {
  std::vector<BoundaryTag> tags(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2 p = vertices[i];
    const bool on_left = std::abs(p.x) <= tol;
    const bool on_right = std::abs(p.x - 1.0) <= tol;
    const bool on_bottom = std::abs(p.y) <= tol;
    const bool on_top = std::abs(p.y - 1.0) <= tol;
    BoundaryTag& t = tags[i];
    if (on_bottom && on_left) {
      t = {BoundaryKind::Corner, 0};
    } else if (on_bottom && on_right) {
      t = {BoundaryKind::Corner, 1};
    } else if (on_top && on_right) {
      t = {BoundaryKind::Corner, 2};
    } else if (on_top && on_left) {
      t = {BoundaryKind::Corner, 3};
    } else if (on_bottom) {
      t = {BoundaryKind::Side, 0};
    } else if (on_right) {
      t = {BoundaryKind::Side, 1};
    } else if (on_top) {
      t = {BoundaryKind::Side, 2};
    } else if (on_left) {
      t = {BoundaryKind::Side, 3};
    } else {
      t = {BoundaryKind::Interior, -1};
    }
  }
  return tags;
}

Vec2 corner_position(int corner_id) {
  switch (corner_id) {
    case 0: return {0.0, 0.0};
    case 1: return {1.0, 0.0};
    case 2: return {1.0, 1.0};
    default: return {0.0, 1.0};
  }
}

MeshDiagnostics validate_mesh(const PolygonMesh& mesh, double expected_area) {
  MeshDiagnostics diag;
  const int nv = static_cast<int>(mesh.vertices.size());
  double area_sum = 0.0;
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& loop = mesh.cells[c];
    const std::string label = "cell " + std::to_string(c);
    if (loop.size() < 3) {
      diag.violations.push_back(label + ": fewer than 3 vertices");
      continue;
    }
    bool index_ok = true;
    for (int v : loop) {
      if (v < 0 || v >= nv) {
        diag.violations.push_back(label + ": vertex index " + std::to_string(v) +
                                  " out of range");
        index_ok = false;
      }
    }
    if (!index_ok) continue;
    std::set<int> distinct(loop.begin(), loop.end());
    if (distinct.size() != loop.size()) {
      diag.violations.push_back(label + ": repeated vertex index");
      continue;
    }

    Polygon poly = mesh.cell_polygon(static_cast<int>(c));
    const double area = signed_area(poly);
    if (area <= 0.0) {
      diag.violations.push_back(label + ": orientation not counter-clockwise");
      continue;
    }
    area_sum += area;

    const double diam = polygon_diameter(poly);
    const double collinear_tol = 1e-12 * diam * diam;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = poly[i];
      const Vec2 b = poly[(i + 1) % n];
      const Vec2 cpt = poly[(i + 2) % n];
      const double cr = orient2d(a, b, cpt);
      if (cr <= 0.0) {
        diag.violations.push_back(label + ": not strictly convex at vertex " +
                                  std::to_string(loop[(i + 1) % n]));
        break;
      }
      if (std::abs(cr) <= collinear_tol) {
        diag.violations.push_back(label + ": collinear vertices near vertex " +
                                  std::to_string(loop[(i + 1) % n]));
        break;
      }
    }
  }

  if (expected_area >= 0.0) {
    const double scale = std::max(expected_area, 1.0);
    if (std::abs(area_sum - expected_area) > 1e-10 * scale) {
      std::ostringstream os;
      os << "cell areas sum to " << area_sum << ", expected " << expected_area
         << " (gap or overlap)";
      diag.violations.push_back(os.str());
    }
  }
  return diag;
}

double cell_area(const PolygonMesh& mesh, int cell_id) {
  return signed_area(mesh.cell_polygon(cell_id));
}

Vec2 arithmetic_center(const PolygonMesh& mesh, int cell_id) {
  return vertex_mean(mesh.cell_polygon(cell_id));
}

std::vector<std::array<int, 3>> polygon_subdivision_indices(std::size_t n,
                                                            SubdivisionScheme scheme) {
  std::vector<std::array<int, 3>> tris;
  if (scheme == SubdivisionScheme::A) {
    tris.reserve(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      tris.push_back({0, static_cast<int>(i), static_cast<int>(i + 1)});
    }
  } else {
    tris.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      tris.push_back({static_cast<int>(i), static_cast<int>((i + 1) % n),
                      static_cast<int>(n)});
    }
  }
  return tris;
}

TriSubdivision subdivide(const PolygonMesh& mesh, SubdivisionScheme scheme) {
  TriSubdivision sub;
  sub.scheme = scheme;
  sub.n_mesh_vertices = mesh.vertices.size();
  sub.tri_vertices = mesh.vertices;
  sub.vertex_origin.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    sub.vertex_origin[i] = {false, static_cast<int>(i)};
  }
  if (scheme == SubdivisionScheme::B) {
    sub.tri_vertices.reserve(mesh.vertices.size() + mesh.cells.size());
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
      sub.tri_vertices.push_back(arithmetic_center(mesh, static_cast<int>(c)));
      sub.vertex_origin.push_back({true, static_cast<int>(c)});
    }
  }

  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& loop = mesh.cells[c];
    const std::size_t n = loop.size();
    const auto local = polygon_subdivision_indices(n, scheme);
    for (const auto& t : local) {
      std::array<int, 3> tri;
      for (int k = 0; k < 3; ++k) {
        tri[k] = (t[k] == static_cast<int>(n)) ? sub.center_index(static_cast<int>(c))
                                               : loop[t[k]];
      }
      const double area = orient2d(sub.tri_vertices[tri[0]], sub.tri_vertices[tri[1]],
                                   sub.tri_vertices[tri[2]]);
      if (area <= 0.0) {
        throw std::runtime_error("subdivide: degenerate triangle in cell " +
                                 std::to_string(c));
      }
      sub.triangles.push_back(tri);
      sub.parent.push_back(static_cast<int>(c));
    }
  }
  return sub;
}

std::string format_g17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string mesh_to_json(const PolygonMesh& mesh) {
  std::ostringstream os;
  os << "{\n  \"dim\": 2,\n  \"vertices\": [\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    os << "    [" << format_g17(mesh.vertices[i].x) << ", "
       << format_g17(mesh.vertices[i].y) << "]"
       << (i + 1 < mesh.vertices.size() ? "," : "") << "\n";
  }
  os << "  ],\n  \"cells\": [\n";
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    os << "    [";
    for (std::size_t k = 0; k < mesh.cells[c].size(); ++k) {
      os << mesh.cells[c][k] << (k + 1 < mesh.cells[c].size() ? ", " : "");
    }
    os << "]" << (c + 1 < mesh.cells.size() ? "," : "") << "\n";
  }
  os << "  ],\n  \"boundary\": {\"corners\": [";
  bool first = true;
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
    if (mesh.boundary[i].is_corner()) {
      os << (first ? "" : ", ") << i;
      first = false;
    }
  }
  os << "], \"sides\": [";
  for (int s = 0; s < 4; ++s) {
    os << (s == 0 ? "[" : ", [");
    first = true;
    for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
      if (mesh.boundary[i].is_side() && mesh.boundary[i].id == s) {
        os << (first ? "" : ", ") << i;
        first = false;
      }
    }
    os << "]";
  }
  os << "]}\n}\n";
  return os.str();
}

PolygonMesh mesh_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("mesh parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("cells")) {
    throw std::runtime_error("mesh parse error: missing \"vertices\" or \"cells\"");
  }
  if (doc.contains("dim") && doc["dim"].get<int>() != 2) {
    throw std::runtime_error("mesh parse error: only dim 2 is supported");
  }
  PolygonMesh mesh;
  for (const auto& v : doc["vertices"]) {
    if (!v.is_array() || v.size() != 2) {
      throw std::runtime_error("mesh parse error: vertex is not an [x, y] pair");
    }
    mesh.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  for (const auto& c : doc["cells"]) {
    if (!c.is_array() || c.size() < 3) {
      throw std::runtime_error("mesh parse error: cell with fewer than 3 vertices");
    }
    std::vector<int> loop;
    for (const auto& idx : c) loop.push_back(idx.get<int>());
    mesh.cells.push_back(std::move(loop));
  }
  mesh.boundary = classify_boundary(mesh.vertices);

  MeshDiagnostics diag = validate_mesh(mesh, 1.0);
  if (!diag.ok()) {
    std::string msg = "mesh validation failed:";
    for (const auto& v : diag.violations) msg += "\n  " + v;
    throw std::runtime_error(msg);
  }
  return mesh;
}

void save_mesh(const PolygonMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << mesh_to_json(mesh);
}

PolygonMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return mesh_from_json(buf.str());
}

}  // namespace polyadapt
