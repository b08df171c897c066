#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dynsplat/camera.hpp"
#include "dynsplat/cloud.hpp"
#include "dynsplat/image.hpp"

namespace dynsplat {

// Rendering constants shared by the tile path and the brute-force reference so
// both agree by construction.
constexpr int kTileSize = 16;
constexpr double kCovarianceFloor = 0.3;     // px^2 added to the 2D covariance diagonal
constexpr double kWeightClip = 0.99;         // per-sample weight cap
constexpr double kStopTransmittance = 1e-4;  // tile-path early-out
constexpr double kSigmaBound = 9.0;          // d^T Sigma^-1 d cutoff (3 sigma)
constexpr double kNearClip = 0.01;           // camera-space z below this is culled

// Spherical-harmonic basis constants (degree 0 and 1).
constexpr double kSh0 = 0.28209479177387814;
constexpr double kSh1 = 0.4886025119029199;

struct ProjectedGaussians {
    std::size_t count = 0;
    int cnn_feature_dim = 0;
    std::vector<double> means2d;    // [N][2] pixel coordinates
    std::vector<double> cov2d;      // [N][3] (a, b, c) of [[a,b],[b,c]], floor applied
    std::vector<double> cov2d_inv;  // [N][3]
    std::vector<double> depths;     // [N] camera-space z
    std::vector<double> colors;     // [N][3] SH evaluated toward the camera, clamped at 0
    std::vector<double> latents;    // [N][C_h]
    std::vector<double> opacities;  // [N] activated opacities
    std::vector<double> radii;      // [N] 3-sigma pixel radius
    std::vector<std::uint8_t> valid;
    std::vector<double> cam_points;          // [N][3], cached for backward
    std::vector<std::uint8_t> color_clamped; // [N][3]
};

struct TileBins {
    int tile_size = kTileSize;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::int32_t>> lists; // ascending (depth, index) per tile
};

struct RenderCache {
    std::vector<double> final_transmittance; // [H*W]
    std::vector<std::int32_t> n_contrib;     // [H*W] list entries consumed per pixel
};

struct RenderOutput {
    Image rgb;    // [H][W][3], composited over the background
    Image latent; // [H][W][C_h], composited over zero
    Image alpha;  // [H][W][1]
    RenderCache cache;
};

// Gradients flowing into the renderer: any image may be null (treated as zero).
struct OutputGrads {
    const Image* rgb = nullptr;
    const Image* latent = nullptr;
    const Image* alpha = nullptr;
};

struct RenderGrads {
    ActGrads act;                       // w.r.t. the posed activated attributes
    std::vector<double> view_grad_norm; // [N] ||dL/d mean2d||, densification signal
};

// Perspective projection with first-order covariance linearization. Invalid
// primitives (behind the camera or fully off-screen beyond 3 sigma) are
// masked, never an error.
ProjectedGaussians project(const ActivatedCloud& act, const Camera& camera);

// A primitive lands in every tile overlapped by its 3-sigma bounding box.
TileBins bin_tiles(const ProjectedGaussians& proj, const Camera& camera, int tile_size = kTileSize);

// Front-to-back alpha compositing of color and latent channels.
RenderOutput composite(const ProjectedGaussians& proj, const TileBins& bins, const Camera& camera,
                       const Eigen::Vector3d& background);

// Exact gradients of composite-after-project w.r.t. the activated attributes.
RenderGrads composite_backward(const ActivatedCloud& act, const Camera& camera,
                               const ProjectedGaussians& proj, const TileBins& bins,
                               const RenderOutput& output, const OutputGrads& grads,
                               const Eigen::Vector3d& background);

// project + bin + composite in one call.
RenderOutput render(const ActivatedCloud& act, const Camera& camera,
                    const Eigen::Vector3d& background);

// Brute-force oracle: independent per-pixel global sort, no tiles, no early
// stop. O(N) per pixel; intended for N <= 1e4.
RenderOutput render_reference(const ActivatedCloud& act, const Camera& camera,
                              const Eigen::Vector3d& background);

} // namespace dynsplat
