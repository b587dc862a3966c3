#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace hvc {

// Number of worker threads to use; 0 picks hardware concurrency.
int effective_workers(int requested);

// Runs fn(i) for i in [begin, end) across a pool of threads. Work is handed
// out in contiguous chunks; fn must only write to disjoint state per index so
// results do not depend on the schedule.
void parallel_for(int begin, int end, const std::function<void(int)>& fn, int workers = 0);

} // namespace hvc
