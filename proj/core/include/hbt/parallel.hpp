#pragma once

#include <cstddef>
#include <functional>

namespace hbt {

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// visited exactly once; callers write results into preallocated slots so the
// output order never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace hbt
