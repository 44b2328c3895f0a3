#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace curveweave {

// Worker cap: CURVEWEAVE_THREADS if set and >= 1, otherwise hardware
// concurrency (at least 1).
inline unsigned worker_count() {
    if (const char* env = std::getenv("CURVEWEAVE_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Runs fn(chunk_index, begin, end) over [0, n) split into at most `workers`
// contiguous chunks. Chunk boundaries depend only on (n, workers), so any
// chunk-indexed reduction done by the caller is reproducible.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
    if (n == 0) return;
    std::size_t chunks = std::min<std::size_t>(workers, n);
    if (chunks <= 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::size_t base = n / chunks, rem = n % chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    std::size_t begin = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        std::size_t len = base + (c < rem ? 1 : 0);
        pool.emplace_back([&fn, c, begin, len] { fn(c, begin, begin + len); });
        begin += len;
    }
    for (auto& t : pool) t.join();
}

} // namespace curveweave
