#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace damctl {

/// Worker count: DAMCTL_THREADS when set to a positive integer, the hardware
/// concurrency otherwise.
int worker_count();

/// Splits [0, n) into contiguous blocks and runs fn(begin, end) on each block
/// in its own thread. Block boundaries depend only on n and threads.
template <class F>
void parallel_blocks(std::size_t n, int threads, F&& fn) {
    const std::size_t t = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    if (t == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(t);
    for (std::size_t w = 0; w < t; ++w) {
        const std::size_t begin = n * w / t;
        const std::size_t end = n * (w + 1) / t;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
}

} // namespace damctl
