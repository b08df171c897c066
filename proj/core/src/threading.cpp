#include "dynsplat/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace dynsplat {

namespace {
std::atomic<int> g_max_threads{0};

int resolved_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0)
            n = 1;
    }
    return n;
}
} // namespace

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

int max_threads() { return resolved_threads(); }

int parallel_chunks(std::int64_t n) {
    if (n <= 0)
        return 0;
    return static_cast<int>(std::min<std::int64_t>(resolved_threads(), n));
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn) {
    if (n <= 0)
        return;
    const int chunks = parallel_chunks(n);
    if (chunks == 1) {
        chunk_fn(0, n);
        return;
    }
    const std::int64_t per = (n + chunks - 1) / chunks;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(chunks - 1));
    for (int c = 1; c < chunks; ++c) {
        const std::int64_t begin = c * per;
        const std::int64_t end = std::min<std::int64_t>(begin + per, n);
        if (begin >= end)
            break;
        workers.emplace_back([&chunk_fn, begin, end] { chunk_fn(begin, end); });
    }
    chunk_fn(0, std::min<std::int64_t>(per, n));
    for (auto& w : workers)
        w.join();
}

} // namespace dynsplat
