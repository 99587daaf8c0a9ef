#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace cg {

/// Runs fn over [0, n) split into at most `threads` contiguous chunks.
/// Chunk boundaries depend only on (n, threads), so any reduction that
/// combines per-chunk results in chunk order is deterministic for a fixed
/// thread count. threads <= 1 runs inline.
inline void parallel_chunks(int n, int threads,
                            const std::function<void(int chunk, int begin, int end)>& fn) {
    if (n <= 0) return;
    int nchunks = std::max(1, std::min(threads, n));
    if (nchunks == 1) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nchunks));
    int base = n / nchunks;
    int rem = n % nchunks;
    int begin = 0;
    for (int c = 0; c < nchunks; ++c) {
        int len = base + (c < rem ? 1 : 0);
        int end = begin + len;
        pool.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
        begin = end;
    }
    for (auto& t : pool) t.join();
}

inline int chunk_count(int n, int threads) {
    if (n <= 0) return 0;
    return std::max(1, std::min(threads, n));
}

}  // namespace cg
