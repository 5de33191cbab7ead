#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace tchand {

// Global worker count. 1 means strictly serial execution.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n). Work items must be independent; callers that
// accumulate floating-point results reduce over per-item slots afterwards,
// in index order, so the outcome does not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace tchand
