#pragma once

#include <cstddef>
#include <functional>

namespace enfo {

/// Worker count from ENFO_THREADS (0 or unset = hardware concurrency).
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker;
/// callers write to disjoint slots and reduce afterwards in index order so
/// results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace enfo
