#include "polyadapt/metric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "polyadapt/parallel.hpp"

namespace polyadapt {

bool is_spd(const SpdTensor2& t) {
  const double tr = t.trace();
  return t.m11 > 0.0 && t.det() > 1e-14 * tr * tr;
}

EigenPair2 sym_eig(const SpdTensor2& t) {
  const double mean = 0.5 * (t.m11 + t.m22);
  const double half_diff = 0.5 * (t.m11 - t.m22);
  const double disc = std::hypot(half_diff, t.m12);
  EigenPair2 e;
  e.lambda1 = mean + disc;
  e.lambda2 = mean - disc;
  const double theta = 0.5 * std::atan2(2.0 * t.m12, t.m11 - t.m22);
  e.v1 = {std::cos(theta), std::sin(theta)};
  e.v2 = {-e.v1.y, e.v1.x};
  return e;
}

SpdTensor2 abs_eig(const SpdTensor2& t) {
  const EigenPair2 e = sym_eig(t);
  const double a1 = std::abs(e.lambda1);
  const double a2 = std::abs(e.lambda2);
  const double c = e.v1.x, s = e.v1.y;
  return {a1 * c * c + a2 * s * s, (a1 - a2) * c * s, a1 * s * s + a2 * c * c};
}

MetricField identity_metric(std::size_t n_vertices) {
  MetricField field;
  field.tensors.assign(n_vertices, SpdTensor2::identity());
  field.provenance = MetricProvenance::Identity;
  return field;
}

SpdTensor2 average_tensors(const std::vector<SpdTensor2>& tensors, const int* ids,
                           std::size_t n) {
  SpdTensor2 acc{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    const SpdTensor2& t = tensors[ids[k]];
    acc.m11 += t.m11;
    acc.m12 += t.m12;
    acc.m22 += t.m22;
  }
  const double inv = 1.0 / static_cast<double>(n);
  return acc.scaled(inv);
}

SpdTensor2 average_metric(const MetricField& field, const std::vector<int>& vertex_ids) {
  return average_tensors(field.tensors, vertex_ids.data(), vertex_ids.size());
}

std::vector<SpdTensor2> subdivision_vertex_tensors(const TriSubdivision& sub,
                                                   const PolygonMesh& mesh,
                                                   const MetricField& field) {
  std::vector<SpdTensor2> out(sub.tri_vertices.size());
  for (std::size_t i = 0; i < sub.tri_vertices.size(); ++i) {
    const TriVertexOrigin& origin = sub.vertex_origin[i];
    if (origin.is_center) {
      out[i] = average_metric(field, mesh.cells[origin.id]);
    } else {
      out[i] = field.tensors[origin.id];
    }
  }
  return out;
}

namespace {

std::vector<std::vector<int>> vertex_neighbors(const PolygonMesh& mesh) {
  std::vector<std::set<int>> nb(mesh.n_vertices());
  for (const auto& loop : mesh.cells) {
    for (int a : loop) {
      for (int b : loop) {
        if (a != b) nb[a].insert(b);
      }
    }
  }
  std::vector<std::vector<int>> out(mesh.n_vertices());
  for (std::size_t i = 0; i < nb.size(); ++i) out[i].assign(nb[i].begin(), nb[i].end());
  return out;
}

// Least-squares quadratic fit around vertex v over the given sample set
// (local coordinates scaled to unit radius). Returns false when the system
// is rank-deficient.
bool fit_quadratic(const PolygonMesh& mesh, const std::vector<double>& values,
                   int v, const std::vector<int>& samples, SpdTensor2* hessian) {
  const std::size_t m = samples.size();
  if (m < 6) return false;
  const Vec2 center = mesh.vertices[v];
  double radius = 0.0;
  for (int j : samples) radius = std::max(radius, norm(mesh.vertices[j] - center));
  if (radius <= 0.0) return false;

  Eigen::MatrixXd A(m, 6);
  Eigen::VectorXd b(m);
  for (std::size_t r = 0; r < m; ++r) {
    const Vec2 d = (mesh.vertices[samples[r]] - center) / radius;
    A(r, 0) = 1.0;
    A(r, 1) = d.x;
    A(r, 2) = d.y;
    A(r, 3) = d.x * d.x;
    A(r, 4) = d.x * d.y;
    A(r, 5) = d.y * d.y;
    b(r) = values[samples[r]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 6) return false;
  const Eigen::VectorXd c = qr.solve(b);
  const double inv_r2 = 1.0 / (radius * radius);
  *hessian = {2.0 * c(3) * inv_r2, c(4) * inv_r2, 2.0 * c(5) * inv_r2};
  return true;
}

}  // namespace

HessianRecovery recover_hessian(const PolygonMesh& mesh,
                                const std::vector<double>& nodal_values) {
  if (nodal_values.size() != mesh.n_vertices()) {
    throw std::runtime_error("recover_hessian: value count != vertex count");
  }
  const std::vector<std::vector<int>> neighbors = vertex_neighbors(mesh);

  HessianRecovery rec;
  rec.hessians.assign(mesh.n_vertices(), SpdTensor2{0.0, 0.0, 0.0});
  std::vector<char> expanded_flag(mesh.n_vertices(), 0);

  parallel_for(mesh.n_vertices(), [&](std::size_t v) {
    std::set<int> ring(neighbors[v].begin(), neighbors[v].end());
    ring.insert(static_cast<int>(v));
    for (int attempt = 0; attempt < 5; ++attempt) {
      std::vector<int> samples(ring.begin(), ring.end());
      SpdTensor2 h;
      if (fit_quadratic(mesh, nodal_values, static_cast<int>(v), samples, &h)) {
        rec.hessians[v] = h;
        if (attempt > 0) expanded_flag[v] = 1;
        return;
      }
      // widen to the next ring
      std::set<int> wider = ring;
      for (int j : ring) wider.insert(neighbors[j].begin(), neighbors[j].end());
      if (wider.size() == ring.size()) break;  // whole mesh reached
      ring.swap(wider);
    }
    // Degenerate even after expansion (tiny mesh); keep a zero Hessian.
    expanded_flag[v] = 1;
  });

  for (std::size_t v = 0; v < expanded_flag.size(); ++v) {
    if (expanded_flag[v]) rec.expanded.push_back(static_cast<int>(v));
  }
  return rec;
}

namespace {

struct AlphaQuadrature {
  std::vector<double> area;       // per subdivision-B triangle
  std::vector<SpdTensor2> habs;   // vertex-averaged |H| per triangle
};

AlphaQuadrature alpha_quadrature(const std::vector<SpdTensor2>& hessians,
                                 const PolygonMesh& mesh) {
  std::vector<SpdTensor2> habs_vertex(hessians.size());
  for (std::size_t i = 0; i < hessians.size(); ++i) habs_vertex[i] = abs_eig(hessians[i]);

  MetricField habs_field;
  habs_field.tensors = std::move(habs_vertex);
  const TriSubdivision sub = subdivide(mesh, SubdivisionScheme::B);
  const std::vector<SpdTensor2> at_vertices =
      subdivision_vertex_tensors(sub, mesh, habs_field);

  AlphaQuadrature q;
  q.area.resize(sub.n_triangles());
  q.habs.resize(sub.n_triangles());
  for (std::size_t k = 0; k < sub.n_triangles(); ++k) {
    const auto& t = sub.triangles[k];
    q.area[k] = tri_area(sub.tri_vertices[t[0]], sub.tri_vertices[t[1]],
                         sub.tri_vertices[t[2]]);
    q.habs[k] = average_tensors(at_vertices, t.data(), 3);
  }
  return q;
}

double det_shifted(const SpdTensor2& h, double alpha) {
  return (alpha + h.m11) * (alpha + h.m22) - h.m12 * h.m12;
}

}  // namespace

AlphaResult solve_alpha(const std::vector<SpdTensor2>& hessians, const PolygonMesh& mesh) {
  if (hessians.size() != mesh.n_vertices()) {
    throw std::runtime_error("solve_alpha: tensor count != vertex count");
  }
  const AlphaQuadrature q = alpha_quadrature(hessians, mesh);

  double rhs = 0.0;
  for (std::size_t k = 0; k < q.area.size(); ++k) {
    rhs += q.area[k] * std::cbrt(std::max(0.0, det_shifted(q.habs[k], 0.0)));
  }
  rhs *= 2.0;

  AlphaResult res;
  if (rhs <= 0.0) {
    res.alpha = 1.0;
    res.uniform_fallback = true;
    return res;
  }

  auto lhs = [&](double alpha) {
    double s = 0.0;
    for (std::size_t k = 0; k < q.area.size(); ++k) {
      s += q.area[k] * std::cbrt(det_shifted(q.habs[k], alpha));
    }
    return s;
  };

  const double tol = 1e-10 * rhs;
  double lo = 0.0;           // lhs(0) = rhs/2 < rhs
  double hi = 1.0;
  int iters = 0;
  while (lhs(hi) < rhs && iters < 120) {
    lo = hi;
    hi *= 2.0;
    ++iters;
  }
  double mid = 0.5 * (lo + hi);
  for (; iters < 200; ++iters) {
    mid = 0.5 * (lo + hi);
    const double f = lhs(mid) - rhs;
    if (std::abs(f) <= tol) break;
    if (f < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  res.alpha = mid;
  res.iterations = iters;
  return res;
}

MetricField build_metric(const std::vector<SpdTensor2>& hessians, double alpha,
                         MetricNorm norm) {
  if (alpha <= 0.0) throw std::runtime_error("build_metric: alpha must be positive");
  MetricField field;
  field.provenance = (norm == MetricNorm::L2) ? MetricProvenance::RecoveredL2
                                              : MetricProvenance::RecoveredH1;
  field.tensors.resize(hessians.size());
  parallel_for(hessians.size(), [&](std::size_t i) {
    SpdTensor2 s = abs_eig(hessians[i]);
    s.m11 += alpha;
    s.m22 += alpha;
    const double d = s.det();
    double c;
    if (norm == MetricNorm::L2) {
      c = std::pow(d, -1.0 / 6.0);
    } else {
      const double lmax = sym_eig(s).lambda1;  // spectral norm (SPD)
      c = std::pow(d, -0.25) * std::sqrt(lmax);
    }
    field.tensors[i] = s.scaled(c);
  });
  return field;
}

SolutionMetric metric_from_solution(const PolygonMesh& mesh,
                                    const std::vector<double>& nodal_values,
                                    MetricNorm norm) {
  const HessianRecovery rec = recover_hessian(mesh, nodal_values);
  SolutionMetric out;
  out.alpha = solve_alpha(rec.hessians, mesh);
  out.field = build_metric(rec.hessians, out.alpha.alpha, norm);
  return out;
}

std::string metric_to_json(const MetricField& field) {
  std::ostringstream os;
  os << "{\n  \"tensors\": [\n";
  for (std::size_t i = 0; i < field.tensors.size(); ++i) {
    const SpdTensor2& t = field.tensors[i];
    os << "    [" << format_g17(t.m11) << ", " << format_g17(t.m12) << ", "
       << format_g17(t.m22) << "]" << (i + 1 < field.tensors.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

MetricField metric_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("metric parse error: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tensors")) {
    throw std::runtime_error("metric parse error: missing \"tensors\"");
  }
  MetricField field;
  field.provenance = MetricProvenance::Analytic;
  for (const auto& row : doc["tensors"]) {
    if (!row.is_array() || row.size() != 3) {
      throw std::runtime_error("metric parse error: tensor is not [m11, m12, m22]");
    }
    const SpdTensor2 t{row[0].get<double>(), row[1].get<double>(), row[2].get<double>()};
    if (!is_spd(t)) {
      throw std::runtime_error("metric validation failed: tensor not positive definite");
    }
    field.tensors.push_back(t);
  }
  return field;
}

void save_metric(const MetricField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << metric_to_json(field);
}

MetricField load_metric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return metric_from_json(buf.str());
}

}  // namespace polyadapt
