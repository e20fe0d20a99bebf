#pragma once

#include <cstddef>
#include <functional>

namespace sparse_sr {

/// Worker count: SPARSE_SR_THREADS if set and positive, otherwise the
/// hardware concurrency (0 and unset both mean auto).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index is
/// visited exactly once; callers write results to slot i so the merged output
/// does not depend on scheduling. The first exception thrown by any body is
/// rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sparse_sr
