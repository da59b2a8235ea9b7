#pragma once

#include <string>
#include <utility>
#include <vector>

#include "polyadapt/geometry.hpp"
#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"

namespace polyadapt {

/// Regular n-gon inscribed in the unit circle, vertices at angles 2*pi*i/n
/// for i = 1..n (counter-clockwise).
Polygon regular_ngon(int n);

/// One regular reference n-gon per cell, matched by vertex count.
std::vector<Polygon> regular_references(const PolygonMesh& mesh);

/// Least-squares affine factor A mapping reference edges onto physical
/// edges: A = E_T E_C^t (E_C E_C^t)^{-1}, with E_T and E_C the 2x(n-1)
/// edge matrices from vertex 0. Reproduces L exactly when T = L*TC + shift.
Mat2 affine_fit(const Polygon& T, const Polygon& TC);

/// How the reference loop is indexed against the cell loop: None keeps the
/// stored order (vertex i to vertex i); Best picks, per cell, the cyclic
/// shift of the reference that minimizes the cell's worst alignment measure.
enum class RefRotation { None, Best };

/// Per-element quality fields and their global summaries for one of the
/// three measure families ("approximations"). Elements are cells for
/// families 1 and 3 and subdivision triangles for family 2. Flagged
/// (inverted/degenerate) elements carry NaN fields and are excluded from
/// the maxima, the mean sigma_h, and the L2 norms.
struct QualityReport {
  int approx = 1;
  std::vector<double> q_ali;
  std::vector<double> q_eq;
  std::vector<double> element_area;
  std::vector<int> element_cell;  // parent cell id (== element id for 1 and 3)
  std::vector<int> flagged;
  double Q_ali = 0.0;
  double Q_eq = 0.0;
  double sigma_h = 0.0;
  double l2_q_ali = 0.0;
  double l2_q_eq = 0.0;
};

/// Family 1: per-cell least-squares affine fit against the reference.
///   q_ali = trace(A^t M A) / (2 det(A^t M A)^(1/2))
///   q_eq  = det(A) sqrt(det M) / sigma_h,  sigma_h = mean of numerators.
QualityReport quality_approx1(const PolygonMesh& mesh, const std::vector<Polygon>& refs,
                              const MetricField& metric,
                              RefRotation rotation = RefRotation::None);

/// Family 2: piecewise-linear barycentric mapping. Both the cell and its
/// reference are subdivided with the same scheme; per sub-triangle K with
/// reference partner KC the Jacobian is J = E_K E_KC^{-1} and
///   q_ali = trace(J^t M J) / (2 det(J^t M J)^(1/2))
///   q_eq  = det(J^t M J) sqrt(det M) / sigma_h,
/// with sigma_h the mean over all sub-triangles.
QualityReport quality_approx2(const PolygonMesh& mesh, const std::vector<Polygon>& refs,
                              const MetricField& metric,
                              SubdivisionScheme scheme = SubdivisionScheme::B,
                              RefRotation rotation = RefRotation::None);

/// SPD frame of a polygon from the SVD of its centered vertex matrix
/// B = [x_i - x_T]: JT = U diag(sigma1, sigma2) U^t and the intrinsic
/// reference polygon KT = JT^{-1} (x_i - x_T) (convex, centered at the
/// origin, radii bounded independently of T's shape).
struct SvdFrame {
  Mat2 U = Mat2::identity();
  double sigma1 = 0.0, sigma2 = 0.0;  // sigma1 >= sigma2 > 0
  Mat2 JT = Mat2::identity();
  Polygon KT;
};
SvdFrame svd_reference(const Polygon& T);

/// Family 3: J = JT from svd_reference (no reference polygon needed);
/// same q formulas as family 2, per cell.
QualityReport quality_approx3(const PolygonMesh& mesh, const MetricField& metric);

/// Area-weighted L2 norms of the per-element (q_ali, q_eq) fields.
std::pair<double, double> q_norms(const QualityReport& report);

/// Per-element CSV (element id, vertex count, q_ali, q_eq) with a final
/// summary row, and a JSON summary of the global measures.
std::string quality_csv(const QualityReport& report, const PolygonMesh& mesh);
std::string quality_summary_json(const QualityReport& report);

}  // namespace polyadapt
