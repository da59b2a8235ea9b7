#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "polyadapt/geometry.hpp"
#include "polyadapt/mesh.hpp"

namespace polyadapt {

/// Symmetric 2x2 tensor. Mostly holds SPD metric tensors, but is also the
/// container for plain symmetric matrices such as recovered Hessians before
/// regularization (which may be indefinite).
struct SpdTensor2 {
  double m11 = 1.0, m12 = 0.0, m22 = 1.0;

  double det() const { return m11 * m22 - m12 * m12; }
  double trace() const { return m11 + m22; }
  Mat2 to_mat() const { return {m11, m12, m12, m22}; }
  SpdTensor2 scaled(double c) const { return {c * m11, c * m12, c * m22}; }

  static SpdTensor2 identity() { return {1.0, 0.0, 1.0}; }
};

/// Positive-definiteness check with tolerance 1e-14 relative to trace^2.
bool is_spd(const SpdTensor2& t);

/// Eigen-decomposition of a symmetric 2x2 tensor; lambda1 >= lambda2 and
/// (v1, v2) orthonormal with v2 = perp(v1).
struct EigenPair2 {
  double lambda1 = 0.0, lambda2 = 0.0;
  Vec2 v1{1.0, 0.0}, v2{0.0, 1.0};
};
EigenPair2 sym_eig(const SpdTensor2& t);

/// Same eigenvectors, eigenvalues replaced by absolute values.
SpdTensor2 abs_eig(const SpdTensor2& t);

enum class MetricProvenance { Identity, Analytic, RecoveredL2, RecoveredH1 };

/// Per-vertex SPD tensor field aligned with a mesh's vertex order.
struct MetricField {
  std::vector<SpdTensor2> tensors;
  MetricProvenance provenance = MetricProvenance::Identity;
};

MetricField identity_metric(std::size_t n_vertices);

SpdTensor2 average_tensors(const std::vector<SpdTensor2>& tensors, const int* ids,
                           std::size_t n);

/// Element average M_T: arithmetic mean of the element's vertex tensors.
SpdTensor2 average_metric(const MetricField& field, const std::vector<int>& vertex_ids);

/// Tensor at every subdivision vertex: mesh vertices keep their own tensor,
/// scheme-B cell centers get the mean of the parent cell's vertex tensors.
std::vector<SpdTensor2> subdivision_vertex_tensors(const TriSubdivision& sub,
                                                   const PolygonMesh& mesh,
                                                   const MetricField& field);

/// Per-vertex Hessian recovery: least-squares fit of a full quadratic to the
/// nodal values over the vertex's cell neighborhood (expanded ring by ring
/// if under-determined); the fitted polynomial's constant Hessian is
/// returned. Exact for globally quadratic data.
struct HessianRecovery {
  std::vector<SpdTensor2> hessians;
  std::vector<int> expanded;  // vertices that needed a neighborhood larger than 1 ring
};
HessianRecovery recover_hessian(const PolygonMesh& mesh,
                                const std::vector<double>& nodal_values);

/// Regularization parameter: the alpha > 0 with
///   integral of det(alpha*I + |H|)^(1/3) = 2 * integral of det(|H|)^(1/3),
/// solved by bisection (the left side is strictly increasing in alpha).
/// Integrals use the midpoint rule on center-subdivision triangles with
/// vertex-averaged |H|. An all-zero Hessian field has no such alpha; the
/// fallback alpha = 1 is returned with uniform_fallback set (the metric then
/// degenerates to a multiple of the identity).
struct AlphaResult {
  double alpha = 1.0;
  bool uniform_fallback = false;
  int iterations = 0;
};
AlphaResult solve_alpha(const std::vector<SpdTensor2>& hessians, const PolygonMesh& mesh);

enum class MetricNorm { L2, H1 };

/// Interpolation-error-optimal metric from recovered Hessians:
///   L2 norm:      M = det(alpha*I + |H|)^(-1/6) * (alpha*I + |H|)
///   H1 seminorm:  M = det(alpha*I + |H|)^(-1/4) * ||alpha*I + |H|||^(1/2)
///                     * (alpha*I + |H|)   (spectral norm)
MetricField build_metric(const std::vector<SpdTensor2>& hessians, double alpha,
                         MetricNorm norm);

struct SolutionMetric {
  MetricField field;
  AlphaResult alpha;
};

/// recover_hessian + solve_alpha + build_metric in one call.
SolutionMetric metric_from_solution(const PolygonMesh& mesh,
                                    const std::vector<double>& nodal_values,
                                    MetricNorm norm);

/// JSON metric document: {"tensors": [[m11, m12, m22], ...]} aligned with
/// mesh vertex order, 17 significant digits. Loading validates SPD-ness.
std::string metric_to_json(const MetricField& field);
MetricField metric_from_json(const std::string& text);
void save_metric(const MetricField& field, const std::string& path);
MetricField load_metric(const std::string& path);

}  // namespace polyadapt
