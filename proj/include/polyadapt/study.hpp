#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polyadapt/mmpde.hpp"

namespace polyadapt {

struct StudyRow {
  int n = 0;  // mesh resolution (n x n cells)
  double err_l2_t0 = 0.0, err_h1_t0 = 0.0;        // on the initial CVT mesh
  double ord_l2_t0 = 0.0, ord_h1_t0 = 0.0;        // NaN on the first row
  double err_l2_tk = 0.0, err_h1_tk = 0.0;        // after the outer iterations
  double ord_l2_tk = 0.0, ord_h1_tk = 0.0;
  bool adapted_complete = true;
};

struct StudyConfig {
  int outer = 5;
  MetricNorm norm = MetricNorm::L2;
  int cvt_iters = 50;
  std::uint64_t seed = 1;
  double tau = 1.0 / 300.0;
  double t_end = 1.0;
  OdeConfig ode;
};

/// For each n: build an n x n CVT mesh, run the adaptation loop, and report
/// errors on the initial and final meshes. Orders between consecutive rows
/// are log(e_prev/e_cur) / log(n_cur/n_prev).
std::vector<StudyRow> convergence_study(const ProblemSpec& problem, const std::vector<int>& ns,
                                        const StudyConfig& config);

/// CSV table; order cells are empty on the first row.
std::string study_csv(const std::vector<StudyRow>& rows);

}  // namespace polyadapt
