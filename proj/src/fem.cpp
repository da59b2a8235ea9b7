#include "polyadapt/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "polyadapt/parallel.hpp"

namespace polyadapt {

namespace {

double triangle_area2(const Vec2& x, const Vec2& a, const Vec2& b) {
  return (a.x - x.x) * (b.y - x.y) - (a.y - x.y) * (b.x - x.x);
}

}  // namespace

void wachspress_values(const Polygon& poly, const Vec2& x, std::vector<double>* values) {
  const std::size_t n = poly.size();
  // Local frame: shift to the vertex mean and rescale by the diameter so the
  // area products stay well scaled for any cell size.
  const Vec2 shift = vertex_mean(poly);
  const double scale = polygon_diameter(poly);
  const double inv = 1.0 / scale;

  thread_local std::vector<Vec2> local;
  thread_local std::vector<double> edge_area;  // A(x, x_j, x_j+1), doubled areas
  local.resize(n);
  edge_area.resize(n);
  for (std::size_t i = 0; i < n; ++i) local[i] = (poly[i] - shift) * inv;
  const Vec2 p = (x - shift) * inv;
  for (std::size_t j = 0; j < n; ++j) {
    edge_area[j] = triangle_area2(p, local[j], local[(j + 1) % n]);
  }

  values->resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    double w = triangle_area2(local[prev], local[i], local[(i + 1) % n]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || j == prev) continue;
      w *= edge_area[j];
    }
    (*values)[i] = w;
    sum += w;
  }
  if (!(sum > 0.0)) {
    throw std::runtime_error("wachspress: point outside polygon or degenerate cell");
  }
  const double inv_sum = 1.0 / sum;
  for (double& v : *values) v *= inv_sum;
}

void wachspress_basis(const Polygon& poly, const Vec2& x, std::vector<double>* values,
                      std::vector<Vec2>* gradients) {
  const std::size_t n = poly.size();
  const Vec2 shift = vertex_mean(poly);
  const double scale = polygon_diameter(poly);
  const double inv = 1.0 / scale;

  thread_local std::vector<Vec2> local;
  thread_local std::vector<double> edge_area;
  thread_local std::vector<Vec2> edge_grad;  // gradient of A(x, x_j, x_j+1) in x
  thread_local std::vector<Vec2> ratio;      // R_i
  local.resize(n);
  edge_area.resize(n);
  edge_grad.resize(n);
  ratio.resize(n);

  for (std::size_t i = 0; i < n; ++i) local[i] = (poly[i] - shift) * inv;
  const Vec2 p = (x - shift) * inv;
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2& a = local[j];
    const Vec2& b = local[(j + 1) % n];
    edge_area[j] = triangle_area2(p, a, b);
    if (edge_area[j] <= 0.0) {
      throw std::runtime_error("wachspress: gradients need a strictly interior point");
    }
    edge_grad[j] = {a.y - b.y, b.x - a.x};
  }

  values->resize(n);
  gradients->resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    double w = triangle_area2(local[prev], local[i], local[(i + 1) % n]);
    Vec2 r{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || j == prev) continue;
      w *= edge_area[j];
      r += edge_grad[j] / edge_area[j];
    }
    (*values)[i] = w;
    ratio[i] = r;
    sum += w;
  }
  const double inv_sum = 1.0 / sum;
  Vec2 mean_ratio{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    (*values)[i] *= inv_sum;
    mean_ratio += ratio[i] * (*values)[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    // d(lambda)/dx in the local frame, then back through the rescaling.
    (*gradients)[i] = (ratio[i] - mean_ratio) * ((*values)[i] * inv);
  }
}

const TriQuadRule& tri_rule_degree4() {
  static const TriQuadRule rule = [] {
    TriQuadRule r;
    auto add3 = [&](double w, double a) {
      r.points.push_back({w, 1.0 - 2.0 * a, a, a});
      r.points.push_back({w, a, 1.0 - 2.0 * a, a});
      r.points.push_back({w, a, a, 1.0 - 2.0 * a});
    };
    add3(0.223381589678011, 0.445948490915965);
    add3(0.109951743655322, 0.091576213509771);
    return r;
  }();
  return rule;
}

const TriQuadRule& tri_rule_degree6() {
  static const TriQuadRule rule = [] {
    TriQuadRule r;
    auto add3 = [&](double w, double a) {
      r.points.push_back({w, 1.0 - 2.0 * a, a, a});
      r.points.push_back({w, a, 1.0 - 2.0 * a, a});
      r.points.push_back({w, a, a, 1.0 - 2.0 * a});
    };
    auto add6 = [&](double w, double a, double b) {
      const double c = 1.0 - a - b;
      r.points.push_back({w, a, b, c});
      r.points.push_back({w, a, c, b});
      r.points.push_back({w, b, a, c});
      r.points.push_back({w, b, c, a});
      r.points.push_back({w, c, a, b});
      r.points.push_back({w, c, b, a});
    };
    add3(0.116786275726379, 0.249286745170910);
    add3(0.050844906370207, 0.063089014491502);
    add6(0.082851075618374, 0.310352451033785, 0.636502499121399);
    return r;
  }();
  return rule;
}

namespace {

struct CellMatrices {
  std::vector<double> stiffness;  // n*n row-major
  std::vector<double> load;       // n
};

CellMatrices cell_poisson(const Polygon& poly, const ScalarField& f) {
  const std::size_t n = poly.size();
  CellMatrices out;
  out.stiffness.assign(n * n, 0.0);
  out.load.assign(n, 0.0);

  const Vec2 center = vertex_mean(poly);
  const TriQuadRule& rule = tri_rule_degree4();
  std::vector<double> lambda;
  std::vector<Vec2> grad;
  for (std::size_t e = 0; e < n; ++e) {
    const Vec2& a = poly[e];
    const Vec2& b = poly[(e + 1) % n];
    const double area = tri_area(a, b, center);
    for (const auto& qp : rule.points) {
      const Vec2 x{qp.l0 * a.x + qp.l1 * b.x + qp.l2 * center.x,
                   qp.l0 * a.y + qp.l1 * b.y + qp.l2 * center.y};
      wachspress_basis(poly, x, &lambda, &grad);
      const double wa = qp.w * area;
      const double fx = f ? f(x) : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        out.load[i] += wa * fx * lambda[i];
        for (std::size_t j = 0; j <= i; ++j) {
          out.stiffness[i * n + j] += wa * dot(grad[i], grad[j]);
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.stiffness[i * n + j] = out.stiffness[j * n + i];
    }
  }
  return out;
}

}  // namespace

PoissonSystem assemble_poisson(const PolygonMesh& mesh, const ProblemSpec& problem) {
  const std::size_t nv = mesh.n_vertices();
  PoissonSystem sys;
  sys.n_vertices = nv;
  sys.dof_of_vertex.assign(nv, -1);
  sys.dirichlet.assign(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    if (mesh.boundary[v].is_interior()) {
      sys.dof_of_vertex[v] = static_cast<int>(sys.interior.size());
      sys.interior.push_back(static_cast<int>(v));
    } else {
      if (!problem.g) throw std::runtime_error("assemble_poisson: missing Dirichlet data");
      sys.dirichlet[v] = problem.g(mesh.vertices[v]);
    }
  }
  sys.rhs.assign(sys.interior.size(), 0.0);
  sys.full_load.assign(nv, 0.0);

  std::vector<CellMatrices> locals(mesh.n_cells());
  parallel_for(mesh.n_cells(), [&](std::size_t c) {
    locals[c] = cell_poisson(mesh.cell_polygon(static_cast<int>(c)), problem.f);
  });

  // Serial scatter in cell order keeps the triplet stream deterministic.
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const auto& loop = mesh.cells[c];
    const std::size_t n = loop.size();
    const CellMatrices& lm = locals[c];
    for (std::size_t i = 0; i < n; ++i) {
      const int vi = loop[i];
      sys.full_load[vi] += lm.load[i];
      for (std::size_t j = 0; j < n; ++j) {
        const double k = lm.stiffness[i * n + j];
        sys.full_row.push_back(vi);
        sys.full_col.push_back(loop[j]);
        sys.full_value.push_back(k);
      }
      const int di = sys.dof_of_vertex[vi];
      if (di < 0) continue;
      sys.rhs[di] += lm.load[i];
      for (std::size_t j = 0; j < n; ++j) {
        const int vj = loop[j];
        const int dj = sys.dof_of_vertex[vj];
        const double k = lm.stiffness[i * n + j];
        if (dj >= 0) {
          sys.row.push_back(di);
          sys.col.push_back(dj);
          sys.value.push_back(k);
        } else {
          sys.rhs[di] -= k * sys.dirichlet[vj];
        }
      }
    }
  }
  return sys;
}

FemSolution solve_system(const PoissonSystem& sys) {
  const std::size_t m = sys.interior.size();
  FemSolution sol;
  sol.nodal_values.assign(sys.n_vertices, 0.0);
  for (std::size_t v = 0; v < sys.n_vertices; ++v) {
    sol.nodal_values[v] = sys.dirichlet[v];
  }
  if (m == 0) return sol;

  Eigen::SparseMatrix<double> a(static_cast<int>(m), static_cast<int>(m));
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(sys.value.size());
    for (std::size_t k = 0; k < sys.value.size(); ++k) {
      trips.emplace_back(sys.row[k], sys.col[k], sys.value[k]);
    }
    a.setFromTriplets(trips.begin(), trips.end());
  }
  a.makeCompressed();
  sol.stats.nnz = static_cast<std::size_t>(a.nonZeros());

  Eigen::VectorXd b(m);
  for (std::size_t i = 0; i < m; ++i) b(static_cast<int>(i)) = sys.rhs[i];

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("solve_system: factorization failed");
  }
  Eigen::VectorXd x = ldlt.solve(b);

  const double bnorm = std::max(b.norm(), 1e-300);
  double residual = (a * x - b).norm() / bnorm;
  int refinements = 0;
  while (residual > 1e-10 && refinements < 5) {
    const Eigen::VectorXd r = b - a * x;
    x += ldlt.solve(r);
    residual = (a * x - b).norm() / bnorm;
    ++refinements;
  }
  if (residual > 1e-10) {
    throw std::runtime_error("solve_system: residual stalled above 1e-10");
  }
  sol.stats.refinement_steps = refinements;
  sol.stats.residual = residual;

  for (std::size_t i = 0; i < m; ++i) {
    sol.nodal_values[sys.interior[i]] = x(static_cast<int>(i));
  }
  return sol;
}

FemSolution solve_poisson(const PolygonMesh& mesh, const ProblemSpec& problem) {
  return solve_system(assemble_poisson(mesh, problem));
}

ErrorNorms error_norms(const PolygonMesh& mesh, const std::vector<double>& nodal_values,
                       const ProblemSpec& problem) {
  if (!problem.u_exact || !problem.grad_exact) {
    throw std::runtime_error("error_norms: problem lacks exact solution data");
  }
  if (nodal_values.size() != mesh.n_vertices()) {
    throw std::runtime_error("error_norms: value count != vertex count");
  }
  const TriQuadRule& rule = tri_rule_degree6();

  std::vector<double> l2_part(mesh.n_cells(), 0.0);
  std::vector<double> h1_part(mesh.n_cells(), 0.0);
  parallel_for(mesh.n_cells(), [&](std::size_t c) {
    const Polygon poly = mesh.cell_polygon(static_cast<int>(c));
    const std::size_t n = poly.size();
    const Vec2 center = vertex_mean(poly);
    std::vector<double> lambda;
    std::vector<Vec2> grad;
    double l2 = 0.0, h1 = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
      const Vec2& a = poly[e];
      const Vec2& b = poly[(e + 1) % n];
      const double area = tri_area(a, b, center);
      for (const auto& qp : rule.points) {
        const Vec2 x{qp.l0 * a.x + qp.l1 * b.x + qp.l2 * center.x,
                     qp.l0 * a.y + qp.l1 * b.y + qp.l2 * center.y};
        wachspress_basis(poly, x, &lambda, &grad);
        double uh = 0.0;
        Vec2 guh{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
          const double ui = nodal_values[mesh.cells[c][i]];
          uh += ui * lambda[i];
          guh += grad[i] * ui;
        }
        const double de = problem.u_exact(x) - uh;
        const Vec2 dg = problem.grad_exact(x) - guh;
        l2 += qp.w * area * de * de;
        h1 += qp.w * area * dot(dg, dg);
      }
    }
    l2_part[c] = l2;
    h1_part[c] = h1;
  });

  ErrorNorms norms;
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    l2 += l2_part[c];
    h1 += h1_part[c];
  }
  norms.l2 = std::sqrt(l2);
  norms.h1 = std::sqrt(h1);
  return norms;
}

}  // namespace polyadapt
