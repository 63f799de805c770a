#pragma once

#include <cstddef>
#include <functional>

namespace laggre {

/// Worker count used when a caller passes 0: the LAGGRE_WORKERS environment
/// variable if set and positive, else the hardware concurrency.
unsigned default_workers();

unsigned resolve_workers(unsigned requested);

/// Runs fn(i) for i in [0, n) on up to `workers` threads, in contiguous chunks.
/// fn must only write state owned by index i; callers reduce afterwards in
/// index order so results do not depend on the worker count.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace laggre
