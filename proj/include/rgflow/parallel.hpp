#pragma once

#include <cstddef>
#include <functional>

namespace rgflow {

/// Worker count: RGFLOW_WORKERS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index
/// runs exactly once; callers write results into per-index slots so output
/// order never depends on scheduling. The exception from the lowest failing
/// index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rgflow
