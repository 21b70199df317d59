#pragma once

#include <cstddef>
#include <functional>

namespace hdiff {

/// Worker count: `requested` if positive, else hardware concurrency; both
/// capped by the HILBERT_DIFF_THREADS environment variable when set.
int resolve_threads(int requested = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be
/// independent; callers reduce results in index order for determinism.
/// The first exception thrown by any item is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace hdiff
