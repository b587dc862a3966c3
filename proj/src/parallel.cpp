#include "hvc/parallel.hpp"

namespace hvc {

int effective_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int begin, int end, const std::function<void(int)>& fn, int workers) {
    const int n = end - begin;
    if (n <= 0) return;
    const int nw = std::min(effective_workers(workers), n);
    if (nw <= 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::atomic<int> next{begin};
    const int chunk = std::max(1, n / (nw * 8));
    auto worker = [&]() {
        for (;;) {
            const int lo = next.fetch_add(chunk);
            if (lo >= end) break;
            const int hi = std::min(lo + chunk, end);
            for (int i = lo; i < hi; ++i) fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nw) - 1);
    for (int t = 1; t < nw; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

} // namespace hvc
