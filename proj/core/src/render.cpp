#include "dynsplat/render.hpp"

#include <algorithm>
#include <cmath>

#include "dynsplat/errors.hpp"
#include "dynsplat/threading.hpp"

namespace dynsplat {

namespace {

Eigen::Matrix3d quat_to_rotmat(const double* q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// Entry-wise derivative of the rotation-matrix polynomial w.r.t. quaternion
// component k. The polynomial is differentiated as-is; normalization belongs
// to the caller's activation step.
Eigen::Matrix3d quat_rotmat_derivative(const double* q, int k) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d d;
    switch (k) {
    case 0:
        d << 0, -2 * z, 2 * y,
             2 * z, 0, -2 * x,
             -2 * y, 2 * x, 0;
        break;
    case 1:
        d << 0, 2 * y, 2 * z,
             2 * y, -4 * x, -2 * w,
             2 * z, 2 * w, -4 * x;
        break;
    case 2:
        d << -4 * y, 2 * x, 2 * w,
             2 * x, 0, 2 * z,
             -2 * w, 2 * z, -4 * y;
        break;
    default:
        d << -4 * z, -2 * w, 2 * x,
             2 * w, -4 * z, 2 * y,
             2 * x, 2 * y, 0;
        break;
    }
    return d;
}

struct ProjectionFrame {
    Eigen::Matrix3d rot;
    Eigen::Matrix3d cov3d;              // R diag(s^2) R^T
    Eigen::Matrix<double, 2, 3> jacobian;
    Eigen::Matrix<double, 2, 3> affine; // J * camera rotation
};

ProjectionFrame projection_frame(const ActivatedCloud& act, const Camera& camera, std::size_t i,
                                 const Eigen::Vector3d& cam_point) {
    ProjectionFrame f;
    f.rot = quat_to_rotmat(&act.rotations[i * 4]);
    const Eigen::Vector3d s(act.scales[i * 3], act.scales[i * 3 + 1], act.scales[i * 3 + 2]);
    f.cov3d = f.rot * s.cwiseProduct(s).asDiagonal() * f.rot.transpose();
    const double z = cam_point.z();
    f.jacobian.setZero();
    f.jacobian(0, 0) = camera.fx / z;
    f.jacobian(0, 2) = -camera.fx * cam_point.x() / (z * z);
    f.jacobian(1, 1) = camera.fy / z;
    f.jacobian(1, 2) = -camera.fy * cam_point.y() / (z * z);
    f.affine = f.jacobian * camera.rotation;
    return f;
}

} // namespace

ProjectedGaussians project(const ActivatedCloud& act, const Camera& camera) {
    camera.validate();
    const std::size_t n = act.size();
    const int ch = act.cnn_feature_dim;
    ProjectedGaussians proj;
    proj.count = n;
    proj.cnn_feature_dim = ch;
    proj.means2d.assign(n * 2, 0.0);
    proj.cov2d.assign(n * 3, 0.0);
    proj.cov2d_inv.assign(n * 3, 0.0);
    proj.depths.assign(n, 0.0);
    proj.colors.assign(n * 3, 0.0);
    proj.latents = act.cnn_features;
    proj.opacities = act.opacities;
    proj.radii.assign(n, 0.0);
    proj.valid.assign(n, 0);
    proj.cam_points.assign(n * 3, 0.0);
    proj.color_clamped.assign(n * 3, 0);

    const Eigen::Vector3d cam_center = camera.center();
    const int coeffs = act.sh_coeff_count();

    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t ii = b; ii < e; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const Eigen::Vector3d pos(act.positions[i * 3], act.positions[i * 3 + 1],
                                      act.positions[i * 3 + 2]);
            const Eigen::Vector3d pc = camera.rotation * pos + camera.translation;
            proj.cam_points[i * 3] = pc.x();
            proj.cam_points[i * 3 + 1] = pc.y();
            proj.cam_points[i * 3 + 2] = pc.z();
            proj.depths[i] = pc.z();
            if (pc.z() < kNearClip)
                continue; // behind the camera

            const double u = camera.fx * pc.x() / pc.z() + camera.cx;
            const double v = camera.fy * pc.y() / pc.z() + camera.cy;
            proj.means2d[i * 2] = u;
            proj.means2d[i * 2 + 1] = v;

            const ProjectionFrame f = projection_frame(act, camera, i, pc);
            Eigen::Matrix2d cov2 = f.affine * f.cov3d * f.affine.transpose();
            cov2(0, 0) += kCovarianceFloor;
            cov2(1, 1) += kCovarianceFloor;
            const double a = cov2(0, 0), bb = cov2(0, 1), c = cov2(1, 1);
            proj.cov2d[i * 3] = a;
            proj.cov2d[i * 3 + 1] = bb;
            proj.cov2d[i * 3 + 2] = c;
            const double det = a * c - bb * bb;
            proj.cov2d_inv[i * 3] = c / det;
            proj.cov2d_inv[i * 3 + 1] = -bb / det;
            proj.cov2d_inv[i * 3 + 2] = a / det;

            const double mid = 0.5 * (a + c);
            const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
            const double radius = 3.0 * std::sqrt(lam_max);
            proj.radii[i] = radius;
            if (u + radius < 0.0 || u - radius > camera.width || v + radius < 0.0 ||
                v - radius > camera.height)
                continue; // off-screen beyond 3 sigma

            const Eigen::Vector3d dir = (pos - cam_center).normalized();
            const double* sh = &act.sh_coeffs[i * static_cast<std::size_t>(coeffs) * 3];
            for (int cch = 0; cch < 3; ++cch) {
                double val = 0.5 + kSh0 * sh[cch];
                if (coeffs > 1) {
                    val += kSh1 * (-dir.y() * sh[3 + cch] + dir.z() * sh[6 + cch] -
                                   dir.x() * sh[9 + cch]);
                }
                proj.color_clamped[i * 3 + cch] = val < 0.0 ? 1 : 0;
                proj.colors[i * 3 + cch] = std::max(val, 0.0);
            }
            proj.valid[i] = 1;
        }
    });
    return proj;
}

TileBins bin_tiles(const ProjectedGaussians& proj, const Camera& camera, int tile_size) {
    TileBins bins;
    bins.tile_size = tile_size;
    bins.tiles_x = (camera.width + tile_size - 1) / tile_size;
    bins.tiles_y = (camera.height + tile_size - 1) / tile_size;
    bins.lists.assign(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y, {});

    for (std::size_t i = 0; i < proj.count; ++i) {
        if (!proj.valid[i])
            continue;
        const double u = proj.means2d[i * 2], v = proj.means2d[i * 2 + 1];
        const double r = proj.radii[i];
        const int tx0 = std::max(0, static_cast<int>(std::floor((u - r) / tile_size)));
        const int tx1 = std::min(bins.tiles_x - 1, static_cast<int>(std::floor((u + r) / tile_size)));
        const int ty0 = std::max(0, static_cast<int>(std::floor((v - r) / tile_size)));
        const int ty1 = std::min(bins.tiles_y - 1, static_cast<int>(std::floor((v + r) / tile_size)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(
                    static_cast<std::int32_t>(i));
    }

    parallel_for(static_cast<std::int64_t>(bins.lists.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t t = b; t < e; ++t) {
            auto& list = bins.lists[static_cast<std::size_t>(t)];
            std::sort(list.begin(), list.end(), [&](std::int32_t lhs, std::int32_t rhs) {
                if (proj.depths[lhs] != proj.depths[rhs])
                    return proj.depths[lhs] < proj.depths[rhs];
                return lhs < rhs;
            });
        }
    });
    return bins;
}

RenderOutput composite(const ProjectedGaussians& proj, const TileBins& bins, const Camera& camera,
                       const Eigen::Vector3d& background) {
    const int height = camera.height, width = camera.width;
    const int ch = proj.cnn_feature_dim;
    RenderOutput out;
    out.rgb = Image(height, width, 3);
    out.latent = Image(height, width, ch);
    out.alpha = Image(height, width, 1);
    out.cache.final_transmittance.assign(static_cast<std::size_t>(height) * width, 1.0);
    out.cache.n_contrib.assign(static_cast<std::size_t>(height) * width, 0);

    parallel_for(static_cast<std::int64_t>(bins.lists.size()), [&](std::int64_t tb, std::int64_t te) {
        std::vector<double> lat_acc(static_cast<std::size_t>(ch));
        for (std::int64_t t = tb; t < te; ++t) {
            const auto& list = bins.lists[static_cast<std::size_t>(t)];
            const int tx = static_cast<int>(t % bins.tiles_x);
            const int ty = static_cast<int>(t / bins.tiles_x);
            const int px0 = tx * bins.tile_size, px1 = std::min(px0 + bins.tile_size, width);
            const int py0 = ty * bins.tile_size, py1 = std::min(py0 + bins.tile_size, height);
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    double transmittance = 1.0;
                    double rgb_acc[3] = {0.0, 0.0, 0.0};
                    std::fill(lat_acc.begin(), lat_acc.end(), 0.0);
                    std::int32_t consumed = 0;
                    for (std::size_t k = 0; k < list.size(); ++k) {
                        const std::int32_t i = list[k];
                        consumed = static_cast<std::int32_t>(k + 1);
                        const double dx = (px + 0.5) - proj.means2d[i * 2];
                        const double dy = (py + 0.5) - proj.means2d[i * 2 + 1];
                        const double* inv = &proj.cov2d_inv[i * 3];
                        const double qf =
                            inv[0] * dx * dx + 2.0 * inv[1] * dx * dy + inv[2] * dy * dy;
                        if (qf > kSigmaBound)
                            continue;
                        const double w =
                            std::min(proj.opacities[i] * std::exp(-0.5 * qf), kWeightClip);
                        const double wt = w * transmittance;
                        for (int cch = 0; cch < 3; ++cch)
                            rgb_acc[cch] += wt * proj.colors[i * 3 + cch];
                        for (int m = 0; m < ch; ++m)
                            lat_acc[static_cast<std::size_t>(m)] += wt * proj.latents[i * ch + m];
                        transmittance *= 1.0 - w;
                        if (transmittance < kStopTransmittance)
                            break;
                    }
                    const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                    out.cache.final_transmittance[pix] = transmittance;
                    out.cache.n_contrib[pix] = consumed;
                    for (int cch = 0; cch < 3; ++cch)
                        out.rgb.at(py, px, cch) = rgb_acc[cch] + transmittance * background[cch];
                    for (int m = 0; m < ch; ++m)
                        out.latent.at(py, px, m) = lat_acc[static_cast<std::size_t>(m)];
                    out.alpha.at(py, px, 0) = 1.0 - transmittance;
                }
            }
        }
    });
    return out;
}

RenderGrads composite_backward(const ActivatedCloud& act, const Camera& camera,
                               const ProjectedGaussians& proj, const TileBins& bins,
                               const RenderOutput& output, const OutputGrads& grads,
                               const Eigen::Vector3d& background) {
    const int height = camera.height, width = camera.width;
    const int ch = proj.cnn_feature_dim;
    const std::size_t n = proj.count;
    if (output.cache.final_transmittance.size() != static_cast<std::size_t>(height) * width)
        throw DataError("composite_backward: stale cache (image size mismatch)");
    if (act.size() != n)
        throw DataError("composite_backward: stale cache (primitive count mismatch)");

    // Per-entry screen-space accumulators: [gmx gmy gla glb glc gcol0..2 galpha glat...]
    const int stride = 9 + ch;
    std::vector<std::vector<double>> tile_local(bins.lists.size());

    parallel_for(static_cast<std::int64_t>(bins.lists.size()), [&](std::int64_t tb, std::int64_t te) {
        std::vector<double> s_lat(static_cast<std::size_t>(ch));
        std::vector<double> g_lat(static_cast<std::size_t>(ch));
        for (std::int64_t t = tb; t < te; ++t) {
            const auto& list = bins.lists[static_cast<std::size_t>(t)];
            if (list.empty())
                continue;
            auto& local = tile_local[static_cast<std::size_t>(t)];
            local.assign(list.size() * static_cast<std::size_t>(stride), 0.0);
            const int tx = static_cast<int>(t % bins.tiles_x);
            const int ty = static_cast<int>(t / bins.tiles_x);
            const int px0 = tx * bins.tile_size, px1 = std::min(px0 + bins.tile_size, width);
            const int py0 = ty * bins.tile_size, py1 = std::min(py0 + bins.tile_size, height);
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    const std::size_t pix = static_cast<std::size_t>(py) * width + px;
                    double g_rgb[3] = {0, 0, 0};
                    double g_alpha = 0.0;
                    if (grads.rgb)
                        for (int cch = 0; cch < 3; ++cch)
                            g_rgb[cch] = grads.rgb->at(py, px, cch);
                    if (grads.alpha)
                        g_alpha = grads.alpha->at(py, px, 0);
                    bool any = g_rgb[0] != 0.0 || g_rgb[1] != 0.0 || g_rgb[2] != 0.0 || g_alpha != 0.0;
                    if (grads.latent) {
                        for (int m = 0; m < ch; ++m) {
                            g_lat[static_cast<std::size_t>(m)] = grads.latent->at(py, px, m);
                            any = any || g_lat[static_cast<std::size_t>(m)] != 0.0;
                        }
                    } else {
                        std::fill(g_lat.begin(), g_lat.end(), 0.0);
                    }
                    if (!any)
                        continue;

                    const double t_final = output.cache.final_transmittance[pix];
                    const std::int32_t contrib = output.cache.n_contrib[pix];
                    double t_after = t_final;
                    double s_rgb[3] = {t_final * background[0], t_final * background[1],
                                       t_final * background[2]};
                    std::fill(s_lat.begin(), s_lat.end(), 0.0);

                    for (std::int32_t k = contrib - 1; k >= 0; --k) {
                        const std::int32_t i = list[static_cast<std::size_t>(k)];
                        const double dx = (px + 0.5) - proj.means2d[i * 2];
                        const double dy = (py + 0.5) - proj.means2d[i * 2 + 1];
                        const double* inv = &proj.cov2d_inv[i * 3];
                        const double qf =
                            inv[0] * dx * dx + 2.0 * inv[1] * dx * dy + inv[2] * dy * dy;
                        if (qf > kSigmaBound)
                            continue;
                        const double falloff = std::exp(-0.5 * qf);
                        const double w0 = proj.opacities[i] * falloff;
                        const bool clipped = w0 > kWeightClip;
                        const double w = clipped ? kWeightClip : w0;
                        const double one_minus = 1.0 - w;
                        const double t_before = t_after / one_minus;

                        double* acc = &local[static_cast<std::size_t>(k) * stride];
                        double grad_w = g_alpha * (t_final / one_minus);
                        const double wt = w * t_before;
                        for (int cch = 0; cch < 3; ++cch) {
                            const double c = proj.colors[i * 3 + cch];
                            grad_w += g_rgb[cch] * (t_before * c - s_rgb[cch] / one_minus);
                            acc[5 + cch] += g_rgb[cch] * wt;
                            s_rgb[cch] += wt * c;
                        }
                        for (int m = 0; m < ch; ++m) {
                            const double h = proj.latents[i * ch + m];
                            const double gl = g_lat[static_cast<std::size_t>(m)];
                            grad_w += gl * (t_before * h - s_lat[static_cast<std::size_t>(m)] / one_minus);
                            acc[9 + m] += gl * wt;
                            s_lat[static_cast<std::size_t>(m)] += wt * h;
                        }
                        if (!clipped) {
                            acc[8] += grad_w * falloff; // d/d opacity
                            const double dq = -0.5 * w0 * grad_w;
                            acc[2] += dq * dx * dx;
                            acc[3] += dq * 2.0 * dx * dy;
                            acc[4] += dq * dy * dy;
                            acc[0] += -dq * (2.0 * inv[0] * dx + 2.0 * inv[1] * dy);
                            acc[1] += -dq * (2.0 * inv[1] * dx + 2.0 * inv[2] * dy);
                        }
                        t_after = t_before;
                    }
                }
            }
        }
    });

    // Deterministic reduction: tiles in index order.
    std::vector<double> accum(n * static_cast<std::size_t>(stride), 0.0);
    for (std::size_t t = 0; t < bins.lists.size(); ++t) {
        const auto& list = bins.lists[t];
        const auto& local = tile_local[t];
        if (local.empty())
            continue;
        for (std::size_t k = 0; k < list.size(); ++k) {
            double* dst = &accum[static_cast<std::size_t>(list[k]) * stride];
            const double* src = &local[k * static_cast<std::size_t>(stride)];
            for (int m = 0; m < stride; ++m)
                dst[m] += src[m];
        }
    }

    RenderGrads out;
    out.act.resize_like(act);
    out.view_grad_norm.assign(n, 0.0);
    const Eigen::Vector3d cam_center = camera.center();
    const int coeffs = act.sh_coeff_count();

    parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t ii = b; ii < e; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            if (!proj.valid[i])
                continue;
            const double* acc = &accum[i * static_cast<std::size_t>(stride)];
            bool any = false;
            for (int m = 0; m < stride; ++m)
                if (acc[m] != 0.0) {
                    any = true;
                    break;
                }
            if (!any)
                continue;

            const Eigen::Vector2d g_mean(acc[0], acc[1]);
            out.view_grad_norm[i] = g_mean.norm();

            const Eigen::Vector3d pc(proj.cam_points[i * 3], proj.cam_points[i * 3 + 1],
                                     proj.cam_points[i * 3 + 2]);
            const double z = pc.z();
            const ProjectionFrame f = projection_frame(act, camera, i, pc);

            // Sigma2 inverse -> Sigma2.
            Eigen::Matrix2d lam;
            lam << proj.cov2d_inv[i * 3], proj.cov2d_inv[i * 3 + 1], proj.cov2d_inv[i * 3 + 1],
                proj.cov2d_inv[i * 3 + 2];
            Eigen::Matrix2d g_lam;
            g_lam << acc[2], acc[3] * 0.5, acc[3] * 0.5, acc[4];
            const Eigen::Matrix2d g_cov2 = -lam * g_lam * lam;

            // Sigma2 = A Sigma3 A^T (+ floor).
            const Eigen::Matrix<double, 2, 3> g_affine = 2.0 * g_cov2 * f.affine * f.cov3d;
            const Eigen::Matrix3d g_cov3 = f.affine.transpose() * g_cov2 * f.affine;
            const Eigen::Matrix<double, 2, 3> g_jacobian = g_affine * camera.rotation.transpose();

            // J and the pixel mean both depend on the camera-space point.
            Eigen::Vector3d g_pc = Eigen::Vector3d::Zero();
            const double z2 = z * z, z3 = z2 * z;
            g_pc.x() += g_jacobian(0, 2) * (-camera.fx / z2);
            g_pc.y() += g_jacobian(1, 2) * (-camera.fy / z2);
            g_pc.z() += g_jacobian(0, 0) * (-camera.fx / z2) +
                        g_jacobian(0, 2) * (2.0 * camera.fx * pc.x() / z3) +
                        g_jacobian(1, 1) * (-camera.fy / z2) +
                        g_jacobian(1, 2) * (2.0 * camera.fy * pc.y() / z3);
            g_pc.x() += g_mean.x() * camera.fx / z;
            g_pc.z() += g_mean.x() * (-camera.fx * pc.x() / z2);
            g_pc.y() += g_mean.y() * camera.fy / z;
            g_pc.z() += g_mean.y() * (-camera.fy * pc.y() / z2);

            Eigen::Vector3d g_pos = camera.rotation.transpose() * g_pc;

            // Sigma3 = R diag(s^2) R^T.
            const Eigen::Vector3d s(act.scales[i * 3], act.scales[i * 3 + 1], act.scales[i * 3 + 2]);
            const Eigen::Matrix3d g_rot = 2.0 * g_cov3 * f.rot * s.cwiseProduct(s).asDiagonal();
            const Eigen::Matrix3d rtgr = f.rot.transpose() * g_cov3 * f.rot;
            for (int k = 0; k < 3; ++k)
                out.act.scales[i * 3 + k] = 2.0 * s[k] * rtgr(k, k);
            const double* quat = &act.rotations[i * 4];
            for (int k = 0; k < 4; ++k)
                out.act.rotations[i * 4 + k] =
                    (g_rot.array() * quat_rotmat_derivative(quat, k).array()).sum();

            // Color path: clamped channels contribute nothing.
            const Eigen::Vector3d pos(act.positions[i * 3], act.positions[i * 3 + 1],
                                      act.positions[i * 3 + 2]);
            const Eigen::Vector3d view = pos - cam_center;
            const double view_norm = view.norm();
            const Eigen::Vector3d dir = view / view_norm;
            Eigen::Vector3d g_dir = Eigen::Vector3d::Zero();
            double* g_sh = &out.act.sh_coeffs[i * static_cast<std::size_t>(coeffs) * 3];
            const double* sh = &act.sh_coeffs[i * static_cast<std::size_t>(coeffs) * 3];
            for (int cch = 0; cch < 3; ++cch) {
                if (proj.color_clamped[i * 3 + cch])
                    continue;
                const double gc = acc[5 + cch];
                g_sh[cch] += gc * kSh0;
                if (coeffs > 1) {
                    g_sh[3 + cch] += gc * (-kSh1 * dir.y());
                    g_sh[6 + cch] += gc * (kSh1 * dir.z());
                    g_sh[9 + cch] += gc * (-kSh1 * dir.x());
                    g_dir.x() += gc * (-kSh1 * sh[9 + cch]);
                    g_dir.y() += gc * (-kSh1 * sh[3 + cch]);
                    g_dir.z() += gc * (kSh1 * sh[6 + cch]);
                }
            }
            g_pos += (g_dir - g_dir.dot(dir) * dir) / view_norm;

            for (int k = 0; k < 3; ++k)
                out.act.positions[i * 3 + k] = g_pos[k];
            out.act.opacities[i] = acc[8];
            for (int m = 0; m < ch; ++m)
                out.act.cnn_features[i * ch + m] = acc[9 + m];
        }
    });
    return out;
}

RenderOutput render(const ActivatedCloud& act, const Camera& camera,
                    const Eigen::Vector3d& background) {
    const ProjectedGaussians proj = project(act, camera);
    const TileBins bins = bin_tiles(proj, camera);
    return composite(proj, bins, camera, background);
}

// ---------------------------------------------------------------------------
// Brute-force reference: an independent implementation used as the oracle for
// the tile path. Per-pixel global sort, every Gaussian evaluated at every
// pixel, no early stop.
// ---------------------------------------------------------------------------
RenderOutput render_reference(const ActivatedCloud& act, const Camera& camera,
                              const Eigen::Vector3d& background) {
    camera.validate();
    const std::size_t n = act.size();
    const int ch = act.cnn_feature_dim;
    const int coeffs = act.sh_coeff_count();

    struct Splat {
        double u, v, depth;
        double inv_a, inv_b, inv_c;
        double color[3];
        double opacity;
        std::size_t index;
        bool visible;
    };
    std::vector<Splat> splats(n);

    const double camx = -(camera.rotation(0, 0) * camera.translation(0) +
                          camera.rotation(1, 0) * camera.translation(1) +
                          camera.rotation(2, 0) * camera.translation(2));
    const double camy = -(camera.rotation(0, 1) * camera.translation(0) +
                          camera.rotation(1, 1) * camera.translation(1) +
                          camera.rotation(2, 1) * camera.translation(2));
    const double camz = -(camera.rotation(0, 2) * camera.translation(0) +
                          camera.rotation(1, 2) * camera.translation(1) +
                          camera.rotation(2, 2) * camera.translation(2));

    for (std::size_t i = 0; i < n; ++i) {
        Splat& sp = splats[i];
        sp.index = i;
        sp.visible = false;
        const double px = act.positions[i * 3], py = act.positions[i * 3 + 1],
                     pz = act.positions[i * 3 + 2];
        double cam[3] = {0, 0, 0};
        for (int r = 0; r < 3; ++r)
            cam[r] = camera.rotation(r, 0) * px + camera.rotation(r, 1) * py +
                     camera.rotation(r, 2) * pz + camera.translation(r);
        sp.depth = cam[2];
        if (cam[2] < kNearClip)
            continue;
        sp.u = camera.fx * cam[0] / cam[2] + camera.cx;
        sp.v = camera.fy * cam[1] / cam[2] + camera.cy;

        // 3D covariance entries via explicit loops.
        const double qw = act.rotations[i * 4], qx = act.rotations[i * 4 + 1],
                     qy = act.rotations[i * 4 + 2], qz = act.rotations[i * 4 + 3];
        const double rot[3][3] = {
            {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy)},
            {2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx)},
            {2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy)}};
        const double s0 = act.scales[i * 3], s1 = act.scales[i * 3 + 1], s2 = act.scales[i * 3 + 2];
        double cov3[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                cov3[r][c] = rot[r][0] * rot[c][0] * s0 * s0 + rot[r][1] * rot[c][1] * s1 * s1 +
                             rot[r][2] * rot[c][2] * s2 * s2;

        double jrow0[3], jrow1[3];
        const double invz = 1.0 / cam[2];
        const double j00 = camera.fx * invz, j02 = -camera.fx * cam[0] * invz * invz;
        const double j11 = camera.fy * invz, j12 = -camera.fy * cam[1] * invz * invz;
        for (int c = 0; c < 3; ++c) {
            jrow0[c] = j00 * camera.rotation(0, c) + j02 * camera.rotation(2, c);
            jrow1[c] = j11 * camera.rotation(1, c) + j12 * camera.rotation(2, c);
        }
        double a = kCovarianceFloor, bcov = 0.0, ccov = kCovarianceFloor;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                a += jrow0[r] * cov3[r][c] * jrow0[c];
                bcov += jrow0[r] * cov3[r][c] * jrow1[c];
                ccov += jrow1[r] * cov3[r][c] * jrow1[c];
            }
        const double det = a * ccov - bcov * bcov;
        sp.inv_a = ccov / det;
        sp.inv_b = -bcov / det;
        sp.inv_c = a / det;

        const double mid = 0.5 * (a + ccov);
        const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = 3.0 * std::sqrt(lam_max);
        if (sp.u + radius < 0.0 || sp.u - radius > camera.width || sp.v + radius < 0.0 ||
            sp.v - radius > camera.height)
            continue;

        double dirx = px - camx, diry = py - camy, dirz = pz - camz;
        const double dn = std::sqrt(dirx * dirx + diry * diry + dirz * dirz);
        dirx /= dn;
        diry /= dn;
        dirz /= dn;
        const double* sh = &act.sh_coeffs[i * static_cast<std::size_t>(coeffs) * 3];
        for (int cch = 0; cch < 3; ++cch) {
            double val = 0.5 + kSh0 * sh[cch];
            if (coeffs > 1)
                val += kSh1 * (-diry * sh[3 + cch] + dirz * sh[6 + cch] - dirx * sh[9 + cch]);
            sp.color[cch] = std::max(val, 0.0);
        }
        sp.opacity = act.opacities[i];
        sp.visible = true;
    }

    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (splats[i].visible)
            order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        if (splats[lhs].depth != splats[rhs].depth)
            return splats[lhs].depth < splats[rhs].depth;
        return lhs < rhs;
    });

    RenderOutput out;
    out.rgb = Image(camera.height, camera.width, 3);
    out.latent = Image(camera.height, camera.width, ch);
    out.alpha = Image(camera.height, camera.width, 1);

    parallel_for(camera.height, [&](std::int64_t y0, std::int64_t y1) {
        std::vector<double> lat_acc(static_cast<std::size_t>(ch));
        for (std::int64_t py = y0; py < y1; ++py) {
            for (int px = 0; px < camera.width; ++px) {
                double transmittance = 1.0;
                double rgb_acc[3] = {0, 0, 0};
                std::fill(lat_acc.begin(), lat_acc.end(), 0.0);
                for (const std::size_t i : order) {
                    const Splat& sp = splats[i];
                    const double dx = (px + 0.5) - sp.u;
                    const double dy = (static_cast<double>(py) + 0.5) - sp.v;
                    const double qf =
                        sp.inv_a * dx * dx + 2.0 * sp.inv_b * dx * dy + sp.inv_c * dy * dy;
                    if (qf > kSigmaBound)
                        continue;
                    const double w = std::min(sp.opacity * std::exp(-0.5 * qf), kWeightClip);
                    const double wt = w * transmittance;
                    for (int cch = 0; cch < 3; ++cch)
                        rgb_acc[cch] += wt * sp.color[cch];
                    for (int m = 0; m < ch; ++m)
                        lat_acc[static_cast<std::size_t>(m)] +=
                            wt * act.cnn_features[i * ch + m];
                    transmittance *= 1.0 - w;
                }
                for (int cch = 0; cch < 3; ++cch)
                    out.rgb.at(static_cast<int>(py), px, cch) =
                        rgb_acc[cch] + transmittance * background[cch];
                for (int m = 0; m < ch; ++m)
                    out.latent.at(static_cast<int>(py), px, m) = lat_acc[static_cast<std::size_t>(m)];
                out.alpha.at(static_cast<int>(py), px, 0) = 1.0 - transmittance;
            }
        }
    });
    return out;
}

} // namespace dynsplat
