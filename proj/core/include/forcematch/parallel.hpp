#ifndef FORCEMATCH_PARALLEL_HPP
#define FORCEMATCH_PARALLEL_HPP

#include <cstddef>
#include <functional>

// Minimal fork-join helper used for concurrent objective evaluations and
// bootstrap replicates.  Work items must be independent; results are written
// to caller-owned slots, so no synchronization is needed beyond the join.

namespace forcematch {

// Thread budget: FORCEMATCH_THREADS if set (>= 1), otherwise hardware
// concurrency.
int default_thread_count();

// Runs fn(i) for i in [0, n) on up to `threads` OS threads (0 = default
// budget).  Falls back to a plain loop when n or threads is 1.  The first
// exception thrown by any item is rethrown on the calling thread after the
// join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace forcematch

#endif
