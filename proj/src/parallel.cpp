#include "polyadapt/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace polyadapt {

#ifdef _OPENMP
void set_max_threads(int n) {
  if (n > 0) {
    omp_set_num_threads(n);
  }
}

int max_threads() { return omp_get_max_threads(); }
#else
void set_max_threads(int) {}

int max_threads() { return 1; }
#endif

}  // namespace polyadapt
