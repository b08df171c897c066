#pragma once

#include <cstdint>
#include <functional>

namespace dynsplat {

// Worker cap for all internal parallelism. 0 = hardware concurrency.
void set_max_threads(int n);
int max_threads();

// Static partition of [0, n) into at most max_threads() contiguous chunks;
// chunk_fn(begin, end) runs once per chunk. Partitioning depends only on n and
// the thread cap, so reductions done in chunk order are reproducible.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn);

// Number of chunks parallel_for will use for n items (for sizing per-chunk
// scratch buffers reduced deterministically afterwards).
int parallel_chunks(std::int64_t n);

} // namespace dynsplat
