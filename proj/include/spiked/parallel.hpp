#pragma once

#include <cstddef>
#include <functional>

namespace spiked {

// Number of workers to use for a requested thread count (<= 0 means all cores).
int resolve_threads(int requested);

// Calls body(i) for i in [0, count) on up to `threads` workers. Indices are
// claimed dynamically; callers write results into per-index slots and reduce
// in index order, so results do not depend on the thread count. The first
// exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace spiked
