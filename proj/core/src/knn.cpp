#include "dynsplat/knn.hpp"

#include <algorithm>
#include <string>

#include "dynsplat/errors.hpp"
#include "dynsplat/threading.hpp"

namespace dynsplat {

KnnGraph build_knn(const std::vector<double>& positions, int k) {
    const std::size_t n = positions.size() / 3;
    if (k < 1)
        throw DataError("build_knn: k must be at least 1");
    if (n <= static_cast<std::size_t>(k))
        throw DataError("build_knn: need at least " + std::to_string(k + 1) + " points for k=" +
                        std::to_string(k) + ", got " + std::to_string(n));

    KnnGraph graph;
    graph.k = k;
    graph.count = n;
    graph.neighbors.resize(n * static_cast<std::size_t>(k));

    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t begin, std::int64_t end) {
        // (distance^2, index) pairs; lexicographic order encodes the tie rule.
        std::vector<std::pair<double, std::int32_t>> best;
        for (std::int64_t i = begin; i < end; ++i) {
            best.clear();
            best.reserve(n - 1);
            const double xi = positions[i * 3], yi = positions[i * 3 + 1], zi = positions[i * 3 + 2];
            for (std::size_t j = 0; j < n; ++j) {
                if (static_cast<std::int64_t>(j) == i)
                    continue;
                const double dx = positions[j * 3] - xi;
                const double dy = positions[j * 3 + 1] - yi;
                const double dz = positions[j * 3 + 2] - zi;
                best.emplace_back(dx * dx + dy * dy + dz * dz, static_cast<std::int32_t>(j));
            }
            std::partial_sort(best.begin(), best.begin() + k, best.end());
            for (int m = 0; m < k; ++m)
                graph.neighbors[i * k + m] = best[static_cast<std::size_t>(m)].second;
        }
    });
    return graph;
}

} // namespace dynsplat
