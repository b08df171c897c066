#include "dynsplat/fdcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dynsplat {

double block_rel_err(const double* analytic, const double* numeric, std::size_t n) {
    double block_max = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        block_max = std::max({block_max, std::abs(analytic[i]), std::abs(numeric[i])});
    if (block_max == 0.0)
        return 0.0;
    const double floor = std::max(1e-3 * block_max, 1e-12);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

} // namespace dynsplat
