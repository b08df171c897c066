#pragma once

#include <cstdint>
#include <vector>

namespace dynsplat {

// k-nearest-neighbor graph over canonical positions. Rebuilt whenever N changes.
struct KnnGraph {
    int k = 0;
    std::size_t count = 0;
    std::vector<std::int32_t> neighbors; // [N][k], no self-loops

    const std::int32_t* row(std::size_t i) const { return neighbors.data() + i * k; }
};

// Each row holds the k nearest distinct primitives by Euclidean distance,
// ties broken by lower index. Requires N > k (throws DataError otherwise).
KnnGraph build_knn(const std::vector<double>& positions, int k);

} // namespace dynsplat
