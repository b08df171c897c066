#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dynsplat {

// Central difference of a scalar function w.r.t. one in-place parameter.
inline double central_diff(const std::function<double()>& eval, double& param, double h) {
    const double saved = param;
    param = saved + h;
    const double fp = eval();
    param = saved - h;
    const double fm = eval();
    param = saved;
    return (fp - fm) / (2.0 * h);
}

// Worst per-component relative error between analytic and numeric gradient
// blocks. Components are normalized by max(|a_i|, |n_i|) floored at 1e-3 of
// the block's largest magnitude, so zero entries do not blow up the metric.
double block_rel_err(const double* analytic, const double* numeric, std::size_t n);

inline double block_rel_err(const std::vector<double>& a, const std::vector<double>& n) {
    return block_rel_err(a.data(), n.data(), a.size());
}

struct GradCheckResult {
    std::string component;
    double worst_rel_err = 0.0;
};

// Seeded finite-difference suites per module; `cmd gradcheck` prints these and
// the acceptance tests enforce their thresholds.
std::vector<GradCheckResult> gradcheck_nn(std::uint64_t seed);
std::vector<GradCheckResult> gradcheck_splat_render(std::uint64_t seed);
std::vector<GradCheckResult> gradcheck_deformation(std::uint64_t seed);
std::vector<GradCheckResult> gradcheck_regularizers(std::uint64_t seed);
std::vector<GradCheckResult> gradcheck_trainer(std::uint64_t seed);

} // namespace dynsplat
