#pragma once

#include <vector>

#include "dynsplat/cloud.hpp"
#include "dynsplat/triplane.hpp"

namespace dynsplat {

// Builds a canonical cloud from surface samples: positions from the samples,
// dynamic features queried from the feature field, opacity at 0.1, isotropic
// scale from the mean distance to the 3 nearest neighbors, identity rotations,
// and neutral-gray colors. Throws DataError when `samples` is empty.
GaussianCloud initialize_cloud(const std::vector<double>& samples, const TriPlaneField& features,
                               int sh_degree, int cnn_feature_dim);

} // namespace dynsplat
