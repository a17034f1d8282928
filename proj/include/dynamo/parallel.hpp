#pragma once

#include <cstddef>
#include <functional>

namespace dynamo {

/// Worker cap: set_worker_count() if called with n > 0, else DYNAMO_FORGE_THREADS,
/// else the hardware concurrency.
int worker_count();
void set_worker_count(int n);

/// Runs fn(0..n-1) on up to worker_count() threads. Each index runs exactly once;
/// callers write results into per-index slots so reductions stay in index order.
/// The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dynamo
