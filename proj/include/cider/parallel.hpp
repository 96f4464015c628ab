#pragma once

#include <cstddef>
#include <functional>

namespace cider {

/// Worker count: `requested` if positive, else CIDER_THREADS if set and
/// positive, else the hardware concurrency (at least 1).
int worker_count(int requested = 0);

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Results must not
/// depend on scheduling: callers write to disjoint slots. The first exception
/// thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace cider
