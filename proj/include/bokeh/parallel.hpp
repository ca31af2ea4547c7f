// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace bokeh {

inline int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Static contiguous partition of [begin, end) across threads. Each index is
// processed exactly once; results are independent of the thread count as long
// as fn(i) only writes state owned by index i.
template <typename Fn>
void parallel_for(int begin, int end, int threads, Fn &&fn) {
    const int n = end - begin;
    if (n <= 0) return;
    threads = std::clamp(threads, 1, n);
    if (threads == 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int lo = begin + t * chunk;
        int hi = std::min(lo + chunk, end);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto &th : pool) th.join();
}

} // namespace bokeh
