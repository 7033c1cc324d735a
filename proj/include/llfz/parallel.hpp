#pragma once

#include <cstddef>
#include <functional>

namespace llfz {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_workers(std::size_t count);
std::size_t workers();

/// Runs fn(i) for every i in [0, n). Tasks must write disjoint outputs;
/// results never depend on the worker count. The first exception thrown
/// by any task is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace llfz
