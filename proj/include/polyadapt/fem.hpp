#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "polyadapt/geometry.hpp"
#include "polyadapt/mesh.hpp"

namespace polyadapt {

/// Wachspress generalized barycentric coordinates of a convex polygon,
/// product form: w_i = C_i * prod of the triangle areas A(x, x_j, x_j+1)
/// over edges not adjacent to vertex i. Values are well defined on the
/// closed polygon (vertices and edges included); gradients additionally
/// require a strictly interior point. Coordinates are computed in a
/// translated/rescaled local frame for conditioning.
void wachspress_values(const Polygon& poly, const Vec2& x, std::vector<double>* values);
void wachspress_basis(const Polygon& poly, const Vec2& x, std::vector<double>* values,
                      std::vector<Vec2>* gradients);

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

/// Poisson model problem -Laplace(u) = f with Dirichlet data g; exact
/// solution and gradient are optional and enable error norms.
struct ProblemSpec {
  std::string name;
  ScalarField f;
  ScalarField g;
  ScalarField u_exact;      // may be empty
  VectorField grad_exact;   // may be empty
};

/// Symmetric interior-interior triangle quadrature rule in barycentric
/// coordinates; weights sum to 1 (multiply by the triangle area).
struct TriQuadRule {
  struct Point {
    double w;
    double l0, l1, l2;
  };
  std::vector<Point> points;
};
const TriQuadRule& tri_rule_degree4();
const TriQuadRule& tri_rule_degree6();

/// Assembled Poisson system. The reduced block couples interior vertices
/// only (Dirichlet values eliminated symmetrically into the right-hand
/// side); the full pre-elimination stiffness triplets are kept for
/// diagnostics and property checks. Triplets may contain duplicates, which
/// consumers must sum.
struct PoissonSystem {
  std::size_t n_vertices = 0;
  std::vector<int> interior;        // interior vertex ids in dof order
  std::vector<int> dof_of_vertex;   // -1 for Dirichlet vertices
  std::vector<double> dirichlet;    // g at Dirichlet vertices, 0 elsewhere

  std::vector<int> row, col;        // reduced system triplets (interior dofs)
  std::vector<double> value;
  std::vector<double> rhs;

  std::vector<int> full_row, full_col;  // pre-elimination stiffness triplets
  std::vector<double> full_value;
  std::vector<double> full_load;
};

PoissonSystem assemble_poisson(const PolygonMesh& mesh, const ProblemSpec& problem);

struct AssemblyStats {
  std::size_t nnz = 0;
  int refinement_steps = 0;
  double residual = 0.0;
};

struct FemSolution {
  std::vector<double> nodal_values;
  AssemblyStats stats;
};

/// Solve the reduced system with a sparse direct factorization, with
/// iterative refinement until the relative residual is at most 1e-10.
FemSolution solve_system(const PoissonSystem& system);

/// assemble_poisson + solve_system.
FemSolution solve_poisson(const PolygonMesh& mesh, const ProblemSpec& problem);

struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;  // seminorm
};

/// L2 norm and H1 seminorm of u - u_h, by degree-6 quadrature on
/// center-subdivision triangles with u_h evaluated through the parent
/// cell's Wachspress basis. Requires u_exact and grad_exact.
ErrorNorms error_norms(const PolygonMesh& mesh, const std::vector<double>& nodal_values,
                       const ProblemSpec& problem);

}  // namespace polyadapt
