#pragma once

#include <cstddef>
#include <functional>

namespace plnspatial {

/// Worker count: PLNSPATIAL_THREADS when set, else the hardware concurrency.
unsigned thread_count();

/// Runs fn(0..n-1) on up to thread_count() workers. Tasks must not depend on
/// execution order; the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace plnspatial
