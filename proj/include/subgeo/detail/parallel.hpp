#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace subgeo::detail {

// Static partition of [0, n) over worker threads. Work items must be
// independent and write to disjoint slots; the partition never affects values,
// only wall time, so results are identical for any thread count.
template <class Fn>
void parallel_for(std::size_t n, int n_threads, Fn&& fn) {
    if (n == 0) return;
    if (n_threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(std::size_t(n_threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace subgeo::detail
