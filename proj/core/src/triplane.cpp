#include "dynsplat/triplane.hpp"

#include <algorithm>
#include <cmath>

namespace dynsplat {

namespace {
struct BilinearTap {
    std::size_t idx00, idx10, idx01, idx11; // cell base indices (x-major within row)
    double w00, w10, w01, w11;
};

// Grid coordinate of `x` along `axis`, clamped to the box.
BilinearTap tap_for(const TriPlaneField& field, int plane, const double* point) {
    const int res = field.resolution;
    const int au = TriPlaneField::axis_u(plane);
    const int av = TriPlaneField::axis_v(plane);
    auto grid_coord = [&](int axis) {
        const double lo = field.box_lo[axis], hi = field.box_hi[axis];
        const double t = (point[axis] - lo) / (hi - lo);
        return std::clamp(t, 0.0, 1.0) * static_cast<double>(res - 1);
    };
    const double u = grid_coord(au);
    const double v = grid_coord(av);
    const int iu = std::min(static_cast<int>(u), res - 2);
    const int iv = std::min(static_cast<int>(v), res - 2);
    const double fu = u - iu;
    const double fv = v - iv;
    BilinearTap t;
    const std::size_t row = static_cast<std::size_t>(iv) * res + iu;
    t.idx00 = row;
    t.idx10 = row + 1;
    t.idx01 = row + res;
    t.idx11 = row + res + 1;
    t.w00 = (1.0 - fu) * (1.0 - fv);
    t.w10 = fu * (1.0 - fv);
    t.w01 = (1.0 - fu) * fv;
    t.w11 = fu * fv;
    return t;
}
} // namespace

void eval_triplane(const TriPlaneField& field, const double* points, std::size_t n,
                   std::vector<double>& out) {
    const int ch = field.channels;
    out.assign(n * static_cast<std::size_t>(ch), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = out.data() + i * ch;
        for (int p = 0; p < 3; ++p) {
            const BilinearTap t = tap_for(field, p, points + i * 3);
            const double* grid = field.planes[p].data();
            for (int c = 0; c < ch; ++c) {
                dst[c] += t.w00 * grid[t.idx00 * ch + c] + t.w10 * grid[t.idx10 * ch + c] +
                          t.w01 * grid[t.idx01 * ch + c] + t.w11 * grid[t.idx11 * ch + c];
            }
        }
    }
}

void eval_triplane_backward(const TriPlaneField& field, const double* points, std::size_t n,
                            const double* grad_out,
                            std::array<std::vector<double>, 3>& grad_planes) {
    const int ch = field.channels;
    for (int p = 0; p < 3; ++p)
        if (grad_planes[p].size() != field.planes[p].size())
            grad_planes[p].assign(field.planes[p].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* g = grad_out + i * ch;
        for (int p = 0; p < 3; ++p) {
            const BilinearTap t = tap_for(field, p, points + i * 3);
            double* grid = grad_planes[p].data();
            for (int c = 0; c < ch; ++c) {
                grid[t.idx00 * ch + c] += t.w00 * g[c];
                grid[t.idx10 * ch + c] += t.w10 * g[c];
                grid[t.idx01 * ch + c] += t.w01 * g[c];
                grid[t.idx11 * ch + c] += t.w11 * g[c];
            }
        }
    }
}

} // namespace dynsplat
