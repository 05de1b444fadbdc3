#pragma once

#include <cstddef>
#include <functional>

namespace stratwave {

// Worker count: STRATWAVE_THREADS if set and positive, else the hardware
// concurrency (at least 1).
int worker_threads();

// Runs body(i) for i in [0, n) on up to `threads` workers. The first
// exception thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

} // namespace stratwave
