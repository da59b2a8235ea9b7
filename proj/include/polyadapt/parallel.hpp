#pragma once

#include <cstddef>

namespace polyadapt {

/// Set the maximum number of OpenMP threads used by parallel kernels.
/// n <= 0 restores the runtime default. No-op when built without OpenMP.
void set_max_threads(int n);

/// Number of threads parallel kernels will use (1 without OpenMP).
int max_threads();

/// Parallel loop over [0, n). The body must write only to disjoint,
/// preallocated slots so results are bit-identical for any thread count;
/// all reductions in this codebase are done serially afterwards.
template <typename F>
void parallel_for(std::size_t n, F&& body);

}  // namespace polyadapt

#ifdef _OPENMP
#include <omp.h>
#endif

namespace polyadapt {

template <typename F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    body(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) {
    body(i);
  }
#endif
}

}  // namespace polyadapt
