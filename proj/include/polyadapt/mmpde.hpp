#pragma once

#include <array>
#include <string>
#include <vector>

#include "polyadapt/fem.hpp"
#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"

namespace polyadapt {

// State for one inner (mesh-movement) solve: the physical triangulation is
// frozen while the computational positions xi evolve from the reference
// positions xi_ref toward a minimizer of the mesh energy.
struct MovingMeshState {
  TriSubdivision sub;                  // physical triangles; sub.tri_vertices = x_i
  std::vector<Vec2> xi;                // computational positions (starts at xi_ref)
  std::vector<Vec2> xi_ref;            // fixed reference positions
  std::vector<SpdTensor2> tri_metric;  // metric tensor per triangle
  double tau = 1.0 / 300.0;
  double t_end = 1.0;

  // Precomputed per-triangle data (physical mesh is fixed).
  std::vector<Mat2> ek_inv;          // inverse physical edge matrix
  std::vector<double> inv_det_ek;    // 1 / det(E_K)
  std::vector<double> area;          // physical triangle area
  std::vector<Mat2> m_inv;           // inverse metric per triangle
  std::vector<double> sqrt_det_m;    // sqrt(det metric) per triangle
  std::vector<double> p_vertex;      // vertex weight P_i
  std::vector<BoundaryTag> tags;     // per subdivision vertex
  std::vector<int> adj_offset;       // CSR vertex -> incident (triangle, corner)
  std::vector<std::pair<int, int>> adj;

  std::size_t n_points() const { return sub.tri_vertices.size(); }
};

// Builds the state for mesh (subdivision from the center of each cell),
// extending the per-vertex metric to the subdivision and averaging it per
// triangle. xi_ref must align index-by-index with the subdivision vertices.
MovingMeshState make_state(const PolygonMesh& mesh, const MetricField& vertex_metric,
                           const std::vector<Vec2>& xi_ref, double tau, double t_end);

// Energy density and derivatives. j is the computational-over-physical edge
// Jacobian, det_j its determinant, m the metric on the physical triangle.
double g_function(const Mat2& j, double det_j, const SpdTensor2& m);

struct GDerivatives {
  Mat2 d_j;      // dG/dJ
  double d_det;  // dG/d(det J)
};
GDerivatives g_derivatives(const Mat2& j, double det_j, const SpdTensor2& m);

// Velocities of the three computational vertices of one triangle; they sum to
// zero exactly. kc holds computational positions, k physical positions.
struct ElementVelocities {
  std::array<Vec2, 3> v;
};
ElementVelocities element_velocities(const std::array<Vec2, 3>& kc, const std::array<Vec2, 3>& k,
                                     const SpdTensor2& m);

// Mesh energy at computational positions xi.
double ih_energy(const MovingMeshState& state, const std::vector<Vec2>& xi);

// True if any computational triangle is inverted or collapsed at xi.
bool any_inverted(const MovingMeshState& state, const std::vector<Vec2>& xi);

// Vertex velocities d(xi_i)/dt = (P_i / tau) * sum_K |K| v_i^K with boundary
// constraints applied (corners pinned, side vertices tangential).
std::vector<Vec2> assemble_velocity(const MovingMeshState& state, const std::vector<Vec2>& xi);

// Zeroes constrained velocity components in place.
void apply_boundary_constraints(const std::vector<BoundaryTag>& tags, std::vector<Vec2>* velocity);

enum class OdeMethod { StabilizedExplicit, RungeKutta23 };

struct OdeConfig {
  OdeMethod method = OdeMethod::StabilizedExplicit;
  double rtol = 1e-6;
  double atol = 1e-9;
  double max_step = 0.05;
  double min_step = 1e-13;
  long max_steps = 1000000;
};

struct IntegrateResult {
  std::vector<Vec2> xi;          // positions at t_reached (never tangled)
  bool completed = false;        // reached state.t_end
  double t_reached = 0.0;
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
  std::vector<double> energy;    // I_h at t=0 and after each accepted step
};

// Integrates d(xi)/dt from xi_ref to t_end with error control; steps that
// invert a computational triangle or increase I_h are rejected.
IntegrateResult integrate(const MovingMeshState& state, const OdeConfig& config);

struct InterpolationResult {
  PolygonMesh mesh;
  bool valid = false;            // passed validate_mesh on the unit square
  MeshDiagnostics diagnostics;
};

// Maps each reference point through the piecewise-linear correspondence
// (xi-mesh -> physical mesh) to produce the next physical mesh. Boundary
// points are interpolated along their side; corners are copied.
InterpolationResult interpolate_new_mesh(const MovingMeshState& state,
                                         const std::vector<Vec2>& xi_final,
                                         const PolygonMesh& old_mesh);

struct AdaptConfig {
  int outer_iters = 10;
  double tau = 1.0 / 300.0;
  double t_end = 1.0;
  MetricNorm norm = MetricNorm::L2;
  OdeConfig ode;
};

struct AdaptRecord {
  int iter = 0;
  double q_ali1 = 0, q_ali2 = 0, q_ali3 = 0;
  double q_eq1 = 0, q_eq2 = 0, q_eq3 = 0;
  double l2_q_ali1 = 0, l2_q_eq1 = 0;
  double err_l2 = 0, err_h1 = 0;  // NaN when the problem has no exact solution
  double ih = 0;                  // energy of the current mesh at xi = xi_ref
};

struct AdaptResult {
  std::vector<PolygonMesh> meshes;  // meshes 0..K (K = outer_iters if completed)
  std::vector<AdaptRecord> history;
  std::vector<FemSolution> solutions;  // one per recorded mesh
  bool completed = false;
  std::string failure;  // set when stopped early
};

// Outer adaptation loop: solve, build the metric from the discrete solution,
// move the mesh, interpolate, repeat. On a tangled result the horizon t_end is
// halved and the step retried up to 4 times.
AdaptResult adapt_outer(const ProblemSpec& problem, const PolygonMesh& initial,
                        const AdaptConfig& config);

// CSV with one row per outer iteration (header included).
std::string adapt_history_csv(const std::vector<AdaptRecord>& history);

}  // namespace polyadapt
