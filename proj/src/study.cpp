#include "polyadapt/study.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "polyadapt/voronoi.hpp"

namespace polyadapt {

std::vector<StudyRow> convergence_study(const ProblemSpec& problem, const std::vector<int>& ns,
                                        const StudyConfig& config) {
  if (ns.empty()) throw std::runtime_error("convergence_study: empty resolution list");
  for (std::size_t i = 1; i < ns.size(); ++i) {
    if (ns[i] <= ns[i - 1]) throw std::runtime_error("convergence_study: ns must increase");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<StudyRow> rows;
  for (int n : ns) {
    if (n < 2) throw std::runtime_error("convergence_study: n must be at least 2");
    const CvtResult cvt = generate_cvt(n, config.cvt_iters, config.seed,
                                       /*record_history=*/false);
    AdaptConfig adapt;
    adapt.outer_iters = config.outer;
    adapt.tau = config.tau;
    adapt.t_end = config.t_end;
    adapt.norm = config.norm;
    adapt.ode = config.ode;
    const AdaptResult run = adapt_outer(problem, cvt.mesh, adapt);
    if (run.history.empty()) throw std::runtime_error("convergence_study: no history");

    StudyRow row;
    row.n = n;
    row.err_l2_t0 = run.history.front().err_l2;
    row.err_h1_t0 = run.history.front().err_h1;
    row.err_l2_tk = run.history.back().err_l2;
    row.err_h1_tk = run.history.back().err_h1;
    row.adapted_complete = run.completed;
    row.ord_l2_t0 = row.ord_h1_t0 = row.ord_l2_tk = row.ord_h1_tk = nan;
    if (!rows.empty()) {
      const StudyRow& prev = rows.back();
      const double scale = std::log(static_cast<double>(n) / prev.n);
      row.ord_l2_t0 = std::log(prev.err_l2_t0 / row.err_l2_t0) / scale;
      row.ord_h1_t0 = std::log(prev.err_h1_t0 / row.err_h1_t0) / scale;
      row.ord_l2_tk = std::log(prev.err_l2_tk / row.err_l2_tk) / scale;
      row.ord_h1_tk = std::log(prev.err_h1_tk / row.err_h1_tk) / scale;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::ostringstream os;
  os << "N,err_L2_T0,ord_L2_T0,err_H1_T0,ord_H1_T0,err_L2_Tk,ord_L2_Tk,err_H1_Tk,ord_H1_Tk\n";
  char buf[64];
  auto put = [&](double v) {
    os << ',';
    if (std::isnan(v)) return;  // leave order cells empty where undefined
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    os << buf;
  };
  for (const StudyRow& r : rows) {
    os << r.n;
    put(r.err_l2_t0);
    put(r.ord_l2_t0);
    put(r.err_h1_t0);
    put(r.ord_h1_t0);
    put(r.err_l2_tk);
    put(r.ord_l2_tk);
    put(r.err_h1_tk);
    put(r.ord_h1_tk);
    os << '\n';
  }
  return os.str();
}

}  // namespace polyadapt
