#include "dynsplat/init.hpp"

#include <algorithm>
#include <cmath>

#include "dynsplat/errors.hpp"
#include "dynsplat/knn.hpp"
#include "dynsplat/threading.hpp"

namespace dynsplat {

GaussianCloud initialize_cloud(const std::vector<double>& samples, const TriPlaneField& features,
                               int sh_degree, int cnn_feature_dim) {
    const std::size_t n = samples.size() / 3;
    if (n < 1)
        throw DataError("initialize_cloud: need at least one sample");

    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.cnn_feature_dim = cnn_feature_dim;
    cloud.resize(n);
    cloud.positions = samples;

    eval_triplane(features, samples.data(), n, cloud.dyn_features);
    if (features.channels != GaussianCloud::kDynFeatureDim)
        throw DataError("initialize_cloud: feature field must have 8 channels");

    const double logit01 = inverse_sigmoid(0.1);
    std::fill(cloud.opacity_logits.begin(), cloud.opacity_logits.end(), logit01);

    // Mean distance to the 3 nearest neighbors, floored so coincident samples
    // stay a valid (degenerate) cloud.
    constexpr double kMinDist = 1e-6;
    std::vector<double> mean_dist(n, kMinDist);
    const int k = static_cast<int>(std::min<std::size_t>(3, n - 1));
    if (k >= 1) {
        const KnnGraph graph = build_knn(samples, k);
        parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i) {
                double acc = 0.0;
                for (int m = 0; m < k; ++m) {
                    const std::int32_t j = graph.row(static_cast<std::size_t>(i))[m];
                    double d2 = 0.0;
                    for (int a = 0; a < 3; ++a) {
                        const double d = samples[j * 3 + a] - samples[i * 3 + a];
                        d2 += d * d;
                    }
                    acc += std::sqrt(d2);
                }
                mean_dist[static_cast<std::size_t>(i)] = std::max(acc / k, kMinDist);
            }
        });
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double ls = std::log(mean_dist[i]);
        for (int a = 0; a < 3; ++a)
            cloud.log_scales[i * 3 + a] = ls;
    }
    // resize() already set identity rotations, zero SH (neutral gray under the
    // +0.5 color convention) and zero cnn features.
    return cloud;
}

} // namespace dynsplat
