#pragma once

// Shared-memory worker control. One worker plays the role of one MPI rank:
// grid loops are split over the outermost (slowest) axis in contiguous,
// statically scheduled blocks, so every worker writes a disjoint slab.

#include <omp.h>

#include <algorithm>
#include <cstddef>

namespace plancfd {

inline void set_workers(int n) { omp_set_num_threads(std::max(1, n)); }

inline int workers() { return omp_get_max_threads(); }

/// Calls body(i) for i in [begin, end), statically partitioned across workers.
template <class Body>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Body&& body) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = begin; i < end; ++i) body(i);
}

}  // namespace plancfd
