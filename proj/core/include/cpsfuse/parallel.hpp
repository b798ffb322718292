#pragma once

#include <cstddef>
#include <functional>

namespace cpsfuse {

/// Worker cap: CPSFUSE_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(0..n-1) on up to worker_count() threads. Callers must write results
/// into per-index slots; the first exception (by index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cpsfuse
