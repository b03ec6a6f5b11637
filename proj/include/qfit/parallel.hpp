#pragma once

#include <cstddef>
#include <functional>

namespace qfit {

// Worker cap: QFIT_THREADS env var, else hardware concurrency.
int max_workers();

// Runs fn(begin, end) over [0, n) partitioned into fixed-size blocks.
// Each index is processed exactly once with identical inputs regardless of
// worker count, so elementwise kernels stay deterministic. Small ranges run
// inline to avoid thread overhead.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

}  // namespace qfit
