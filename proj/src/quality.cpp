#include "polyadapt/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "polyadapt/parallel.hpp"

namespace polyadapt {

Polygon regular_ngon(int n) {
  if (n < 3) throw std::runtime_error("regular_ngon: n must be >= 3");
  Polygon p;
  p.reserve(n);
  for (int i = 1; i <= n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    p.push_back({std::cos(a), std::sin(a)});
  }
  return p;
}

std::vector<Polygon> regular_references(const PolygonMesh& mesh) {
  std::vector<Polygon> refs(mesh.n_cells());
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    refs[c] = regular_ngon(static_cast<int>(mesh.cells[c].size()));
  }
  return refs;
}

Mat2 affine_fit(const Polygon& T, const Polygon& TC) {
  const std::size_t n = T.size();
  if (n != TC.size()) throw std::runtime_error("affine_fit: vertex count mismatch");
  if (n < 3) throw std::runtime_error("affine_fit: need at least 3 vertices");
  // Normal equations of min_A ||A*E_C - E_T||_F: A = (E_T E_C^t)(E_C E_C^t)^{-1}.
  Mat2 xt{0.0, 0.0, 0.0, 0.0};  // E_T E_C^t
  Mat2 cc{0.0, 0.0, 0.0, 0.0};  // E_C E_C^t
  for (std::size_t i = 1; i < n; ++i) {
    const Vec2 e = T[i] - T[0];
    const Vec2 ec = TC[i] - TC[0];
    xt.a00 += e.x * ec.x;
    xt.a01 += e.x * ec.y;
    xt.a10 += e.y * ec.x;
    xt.a11 += e.y * ec.y;
    cc.a00 += ec.x * ec.x;
    cc.a01 += ec.x * ec.y;
    cc.a10 += ec.y * ec.x;
    cc.a11 += ec.y * ec.y;
  }
  const double d = cc.det();
  if (std::abs(d) <= 1e-24 * cc.trace() * cc.trace()) {
    throw std::runtime_error("affine_fit: reference edge matrix is rank deficient");
  }
  return xt * cc.inverse();
}

namespace {

// trace(J^t M J) / (2 sqrt(det(J^t M J))) using det(J^t M J) = det(J)^2 det(M).
double alignment_measure(const Mat2& j, const SpdTensor2& m) {
  const Mat2 mj = m.to_mat() * j;
  const Mat2 p = j.transpose() * mj;
  const double det = std::abs(j.det()) * std::sqrt(m.det());
  return p.trace() / (2.0 * det);
}

Polygon rotate_loop(const Polygon& p, std::size_t shift) {
  Polygon out;
  out.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p[(i + shift) % p.size()]);
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Finish a report whose q_ali and per-element equidistribution numerators
// (stored in q_eq) are filled: computes sigma_h, divides the numerators,
// and reduces maxima and L2 norms serially in element order.
void finalize_report(QualityReport* rep) {
  double num_sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t e = 0; e < rep->q_eq.size(); ++e) {
    if (std::isnan(rep->q_eq[e])) continue;
    num_sum += rep->q_eq[e];
    ++valid;
  }
  if (valid == 0) throw std::runtime_error("quality: all elements degenerate");
  rep->sigma_h = num_sum / static_cast<double>(valid);

  double max_ali = 0.0, max_eq = 0.0, l2a = 0.0, l2e = 0.0;
  for (std::size_t e = 0; e < rep->q_eq.size(); ++e) {
    if (std::isnan(rep->q_eq[e])) continue;
    rep->q_eq[e] /= rep->sigma_h;
    max_ali = std::max(max_ali, rep->q_ali[e]);
    max_eq = std::max(max_eq, rep->q_eq[e]);
    l2a += rep->element_area[e] * rep->q_ali[e] * rep->q_ali[e];
    l2e += rep->element_area[e] * rep->q_eq[e] * rep->q_eq[e];
  }
  rep->Q_ali = max_ali;
  rep->Q_eq = max_eq;
  rep->l2_q_ali = std::sqrt(l2a);
  rep->l2_q_eq = std::sqrt(l2e);
}

}  // namespace

QualityReport quality_approx1(const PolygonMesh& mesh, const std::vector<Polygon>& refs,
                              const MetricField& metric, RefRotation rotation) {
  if (refs.size() != mesh.n_cells()) {
    throw std::runtime_error("quality: reference count != cell count");
  }
  const std::size_t nc = mesh.n_cells();
  QualityReport rep;
  rep.approx = 1;
  rep.q_ali.assign(nc, kNaN);
  rep.q_eq.assign(nc, kNaN);
  rep.element_area.assign(nc, 0.0);
  rep.element_cell.resize(nc);
  std::vector<char> bad(nc, 0);

  parallel_for(nc, [&](std::size_t c) {
    rep.element_cell[c] = static_cast<int>(c);
    const Polygon poly = mesh.cell_polygon(static_cast<int>(c));
    rep.element_area[c] = signed_area(poly);
    const SpdTensor2 mt = average_metric(metric, mesh.cells[c]);

    const std::size_t nshift = (rotation == RefRotation::Best) ? poly.size() : 1;
    double best_ali = std::numeric_limits<double>::infinity();
    double best_num = kNaN;
    bool any_valid = false;
    for (std::size_t s = 0; s < nshift; ++s) {
      const Polygon ref = (s == 0) ? refs[c] : rotate_loop(refs[c], s);
      const Mat2 a = affine_fit(poly, ref);
      if (a.det() <= 0.0) continue;
      const double ali = alignment_measure(a, mt);
      if (ali < best_ali) {
        best_ali = ali;
        best_num = a.det() * std::sqrt(mt.det());
        any_valid = true;
      }
    }
    if (!any_valid) {
      bad[c] = 1;
      return;
    }
    rep.q_ali[c] = best_ali;
    rep.q_eq[c] = best_num;  // numerator; divided by sigma_h in finalize
  });

  for (std::size_t c = 0; c < nc; ++c) {
    if (bad[c]) rep.flagged.push_back(static_cast<int>(c));
  }
  finalize_report(&rep);
  return rep;
}

QualityReport quality_approx2(const PolygonMesh& mesh, const std::vector<Polygon>& refs,
                              const MetricField& metric, SubdivisionScheme scheme,
                              RefRotation rotation) {
  if (refs.size() != mesh.n_cells()) {
    throw std::runtime_error("quality: reference count != cell count");
  }
  const std::size_t nc = mesh.n_cells();

  // Element slots: one per sub-triangle, grouped by cell.
  std::vector<std::size_t> offset(nc + 1, 0);
  for (std::size_t c = 0; c < nc; ++c) {
    const std::size_t n = mesh.cells[c].size();
    offset[c + 1] = offset[c] + (scheme == SubdivisionScheme::A ? n - 2 : n);
  }
  const std::size_t ntri = offset[nc];

  QualityReport rep;
  rep.approx = 2;
  rep.q_ali.assign(ntri, kNaN);
  rep.q_eq.assign(ntri, kNaN);
  rep.element_area.assign(ntri, 0.0);
  rep.element_cell.resize(ntri);
  std::vector<char> bad(ntri, 0);

  parallel_for(nc, [&](std::size_t c) {
    const Polygon poly = mesh.cell_polygon(static_cast<int>(c));
    const std::size_t n = poly.size();
    const auto local = polygon_subdivision_indices(n, scheme);

    // Physical sub-triangle corners (index n = arithmetic center).
    std::vector<Vec2> phys(poly.begin(), poly.end());
    phys.push_back(vertex_mean(poly));
    // Per-corner tensors; the auxiliary center uses the cell average.
    std::vector<SpdTensor2> corner_m;
    corner_m.reserve(n + 1);
    for (int v : mesh.cells[c]) corner_m.push_back(metric.tensors[v]);
    corner_m.push_back(average_metric(metric, mesh.cells[c]));

    const std::size_t nshift = (rotation == RefRotation::Best) ? n : 1;
    std::size_t best_shift = 0;
    double best_worst_ali = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < nshift && nshift > 1; ++s) {
      const Polygon ref = rotate_loop(refs[c], s);
      std::vector<Vec2> comp(ref.begin(), ref.end());
      comp.push_back(vertex_mean(ref));
      double worst = 0.0;
      bool ok = true;
      for (const auto& t : local) {
        const Mat2 ek = Mat2::from_columns(phys[t[1]] - phys[t[0]], phys[t[2]] - phys[t[0]]);
        const Mat2 ec = Mat2::from_columns(comp[t[1]] - comp[t[0]], comp[t[2]] - comp[t[0]]);
        const Mat2 j = ek * ec.inverse();
        if (j.det() <= 0.0) {
          ok = false;
          break;
        }
        SpdTensor2 mk{0.0, 0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
          mk.m11 += corner_m[t[k]].m11;
          mk.m12 += corner_m[t[k]].m12;
          mk.m22 += corner_m[t[k]].m22;
        }
        mk = mk.scaled(1.0 / 3.0);
        worst = std::max(worst, alignment_measure(j, mk));
      }
      if (ok && worst < best_worst_ali) {
        best_worst_ali = worst;
        best_shift = s;
      }
    }

    const Polygon ref = (best_shift == 0) ? refs[c] : rotate_loop(refs[c], best_shift);
    std::vector<Vec2> comp(ref.begin(), ref.end());
    comp.push_back(vertex_mean(ref));
    for (std::size_t l = 0; l < local.size(); ++l) {
      const auto& t = local[l];
      const std::size_t e = offset[c] + l;
      rep.element_cell[e] = static_cast<int>(c);
      rep.element_area[e] = tri_area(phys[t[0]], phys[t[1]], phys[t[2]]);
      const Mat2 ek = Mat2::from_columns(phys[t[1]] - phys[t[0]], phys[t[2]] - phys[t[0]]);
      const Mat2 ec = Mat2::from_columns(comp[t[1]] - comp[t[0]], comp[t[2]] - comp[t[0]]);
      const Mat2 j = ek * ec.inverse();
      if (j.det() <= 0.0) {
        bad[e] = 1;
        continue;
      }
      SpdTensor2 mk{0.0, 0.0, 0.0};
      for (int k = 0; k < 3; ++k) {
        mk.m11 += corner_m[t[k]].m11;
        mk.m12 += corner_m[t[k]].m12;
        mk.m22 += corner_m[t[k]].m22;
      }
      mk = mk.scaled(1.0 / 3.0);
      rep.q_ali[e] = alignment_measure(j, mk);
      const double detjmj = j.det() * j.det() * mk.det();
      rep.q_eq[e] = detjmj * std::sqrt(mk.det());
    }
  });

  for (std::size_t e = 0; e < ntri; ++e) {
    if (bad[e]) rep.flagged.push_back(static_cast<int>(e));
  }
  finalize_report(&rep);
  return rep;
}

SvdFrame svd_reference(const Polygon& T) {
  const std::size_t n = T.size();
  if (n < 3) throw std::runtime_error("svd_reference: need at least 3 vertices");
  const Vec2 xt = vertex_mean(T);
  // Eigen-decomposition of B B^t gives the left singular frame of B.
  SpdTensor2 bbt{0.0, 0.0, 0.0};
  for (const Vec2& v : T) {
    const Vec2 d = v - xt;
    bbt.m11 += d.x * d.x;
    bbt.m12 += d.x * d.y;
    bbt.m22 += d.y * d.y;
  }
  const EigenPair2 e = sym_eig(bbt);
  SvdFrame f;
  f.sigma1 = std::sqrt(std::max(0.0, e.lambda1));
  f.sigma2 = std::sqrt(std::max(0.0, e.lambda2));
  if (!(f.sigma2 > 1e-12 * f.sigma1)) {
    throw std::runtime_error("svd_reference: degenerate polygon");
  }
  f.U = Mat2::from_columns(e.v1, e.v2);
  const double c = e.v1.x, s = e.v1.y;
  f.JT = {f.sigma1 * c * c + f.sigma2 * s * s, (f.sigma1 - f.sigma2) * c * s,
          (f.sigma1 - f.sigma2) * c * s, f.sigma1 * s * s + f.sigma2 * c * c};
  const Mat2 jinv = f.JT.inverse();
  f.KT.reserve(n);
  for (const Vec2& v : T) f.KT.push_back(jinv * (v - xt));
  return f;
}

QualityReport quality_approx3(const PolygonMesh& mesh, const MetricField& metric) {
  const std::size_t nc = mesh.n_cells();
  QualityReport rep;
  rep.approx = 3;
  rep.q_ali.assign(nc, kNaN);
  rep.q_eq.assign(nc, kNaN);
  rep.element_area.assign(nc, 0.0);
  rep.element_cell.resize(nc);
  std::vector<char> bad(nc, 0);

  parallel_for(nc, [&](std::size_t c) {
    rep.element_cell[c] = static_cast<int>(c);
    const Polygon poly = mesh.cell_polygon(static_cast<int>(c));
    rep.element_area[c] = signed_area(poly);
    SvdFrame frame;
    try {
      frame = svd_reference(poly);
    } catch (const std::exception&) {
      bad[c] = 1;
      return;
    }
    const SpdTensor2 mt = average_metric(metric, mesh.cells[c]);
    rep.q_ali[c] = alignment_measure(frame.JT, mt);
    const double detj = frame.sigma1 * frame.sigma2;
    rep.q_eq[c] = detj * detj * mt.det() * std::sqrt(mt.det());
  });

  for (std::size_t c = 0; c < nc; ++c) {
    if (bad[c]) rep.flagged.push_back(static_cast<int>(c));
  }
  finalize_report(&rep);
  return rep;
}

std::pair<double, double> q_norms(const QualityReport& report) {
  double l2a = 0.0, l2e = 0.0;
  for (std::size_t e = 0; e < report.q_ali.size(); ++e) {
    if (std::isnan(report.q_ali[e])) continue;
    l2a += report.element_area[e] * report.q_ali[e] * report.q_ali[e];
    l2e += report.element_area[e] * report.q_eq[e] * report.q_eq[e];
  }
  return {std::sqrt(l2a), std::sqrt(l2e)};
}

std::string quality_csv(const QualityReport& report, const PolygonMesh& mesh) {
  std::ostringstream os;
  os << "element,n,q_ali,q_eq\n";
  char buf[128];
  for (std::size_t e = 0; e < report.q_ali.size(); ++e) {
    const int cell = report.element_cell[e];
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.12g,%.12g\n", e,
                  mesh.cells[cell].size(), report.q_ali[e], report.q_eq[e]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "summary,,%.12g,%.12g\n", report.Q_ali, report.Q_eq);
  os << buf;
  return os.str();
}

std::string quality_summary_json(const QualityReport& report) {
  std::ostringstream os;
  os << "{\n"
     << "  \"approx\": " << report.approx << ",\n"
     << "  \"Q_ali\": " << format_g17(report.Q_ali) << ",\n"
     << "  \"Q_eq\": " << format_g17(report.Q_eq) << ",\n"
     << "  \"sigma_h\": " << format_g17(report.sigma_h) << ",\n"
     << "  \"l2_q_ali\": " << format_g17(report.l2_q_ali) << ",\n"
     << "  \"l2_q_eq\": " << format_g17(report.l2_q_eq) << ",\n"
     << "  \"elements\": " << report.q_ali.size() << ",\n"
     << "  \"flagged\": " << report.flagged.size() << "\n"
     << "}\n";
  return os.str();
}

}  // namespace polyadapt
