#include "svdbf/parallel.hpp"

#include <algorithm>

#include <omp.h>

namespace svdbf {

void set_threads(int n) { omp_set_num_threads(std::max(1, n)); }

int threads() { return omp_get_max_threads(); }

}  // namespace svdbf
