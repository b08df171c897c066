#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "dynsplat/rng.hpp"

namespace dynsplat {

// Three axis-aligned feature grids (xy, xz, yz) over the canonical bounding
// box. Queries are clamped to the box, sampled bilinearly per plane, and the
// three plane outputs are summed.
struct TriPlaneField {
    int resolution = 64;
    int channels = 8;
    Eigen::Vector3d box_lo = Eigen::Vector3d(-1, -1, -1);
    Eigen::Vector3d box_hi = Eigen::Vector3d(1, 1, 1);
    // plane p cell (iu, iv) channel c at index (iv * resolution + iu) * channels + c
    std::array<std::vector<double>, 3> planes;

    TriPlaneField() { allocate(); }
    TriPlaneField(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int res = 64, int ch = 8)
        : resolution(res), channels(ch), box_lo(lo), box_hi(hi) {
        allocate();
    }

    void allocate() {
        for (auto& p : planes)
            p.assign(static_cast<std::size_t>(resolution) * resolution * channels, 0.0);
    }

    void init_random(Rng& rng, double std_dev) {
        for (auto& p : planes)
            for (auto& v : p)
                v = std_dev * rng.normal();
    }

    std::size_t cell_count() const {
        return 3 * static_cast<std::size_t>(resolution) * resolution * channels;
    }

    // Axes feeding plane p's (u, v) coordinates.
    static constexpr int axis_u(int plane) { return plane == 2 ? 1 : 0; } // xy->x, xz->x, yz->y
    static constexpr int axis_v(int plane) { return plane == 0 ? 1 : 2; } // xy->y, xz->z, yz->z
};

// points: row-major [n][3]; out: row-major [n][channels].
void eval_triplane(const TriPlaneField& field, const double* points, std::size_t n,
                   std::vector<double>& out);

// Scatters output gradients back onto the bilinear corner cells.
void eval_triplane_backward(const TriPlaneField& field, const double* points, std::size_t n,
                            const double* grad_out, std::array<std::vector<double>, 3>& grad_planes);

} // namespace dynsplat
