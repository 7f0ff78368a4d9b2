#pragma once

#include <cstddef>
#include <functional>

namespace ivnmix {

/// Worker count: IVNMIX_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t thread_count();

/// Calls body(i) for i in [0, n) on up to thread_count() threads. Results must
/// be written to per-index slots; the first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ivnmix
