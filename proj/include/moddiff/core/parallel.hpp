#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace moddiff {

// Process-wide worker count used by parallel_for. 0 means hardware concurrency.
void set_worker_threads(std::size_t n);
std::size_t worker_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; results
// must be written to per-index slots so the outcome is independent of
// scheduling. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace moddiff
