#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace capepde {

inline int resolve_threads(std::int64_t requested) {
    if (requested > 0) return static_cast<int>(requested);
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static contiguous partition of [0, n) over worker threads. Results must
/// be written to per-index slots by the body; any reduction the caller does
/// afterwards in index order is independent of the thread count.
inline void parallel_for(std::int64_t n, int n_threads,
                         const std::function<void(std::int64_t)>& body) {
    if (n <= 0) return;
    const int workers = std::min<std::int64_t>(n, std::max(1, n_threads));
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = n * w / workers;
        const std::int64_t hi = n * (w + 1) / workers;
        pool.emplace_back([lo, hi, &body] {
            for (std::int64_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace capepde
