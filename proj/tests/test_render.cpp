#include "doctest.h"

#include <cmath>

#include "dynsplat/cloud.hpp"
#include "dynsplat/fdcheck.hpp"
#include "dynsplat/render.hpp"
#include "dynsplat/rng.hpp"

using namespace dynsplat;

namespace {

Camera identity_camera(int w, int h, double f) {
    Camera cam;
    cam.fx = cam.fy = f;
    cam.cx = 0.5 * w;
    cam.cy = 0.5 * h;
    cam.width = w;
    cam.height = h;
    return cam;
}

// Directly constructed activated cloud (opacities may be chosen freely).
ActivatedCloud make_act(std::size_t n, int sh_degree = 0, int ch = 2) {
    ActivatedCloud act;
    act.sh_degree = sh_degree;
    act.cnn_feature_dim = ch;
    act.positions.assign(n * 3, 0.0);
    act.rotations.assign(n * 4, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        act.rotations[i * 4] = 1.0;
    act.scales.assign(n * 3, 0.05);
    act.opacities.assign(n, 0.5);
    act.sh_coeffs.assign(n * 3 * static_cast<std::size_t>((sh_degree + 1) * (sh_degree + 1)), 0.0);
    act.cnn_features.assign(n * static_cast<std::size_t>(ch), 0.0);
    return act;
}

// sh DC coefficient that evaluates to `color` under the 0.5-offset convention.
double sh_dc_for(double color) { return (color - 0.5) / kSh0; }

} // namespace

TEST_CASE("project: Gaussian on the optical axis lands on the principal point") {
    Camera cam = identity_camera(64, 48, 100.0);
    ActivatedCloud act = make_act(1);
    act.positions = {0.0, 0.0, 2.0};
    const ProjectedGaussians proj = project(act, cam);
    CHECK(proj.valid[0] == 1);
    CHECK(proj.means2d[0] == doctest::Approx(cam.cx));
    CHECK(proj.means2d[1] == doctest::Approx(cam.cy));
    CHECK(proj.depths[0] == doctest::Approx(2.0));
}

TEST_CASE("project: isotropic covariance matches (f sigma / z)^2 before the floor") {
    Camera cam = identity_camera(64, 64, 100.0);
    ActivatedCloud act = make_act(1);
    act.positions = {0.0, 0.0, 2.0};
    act.scales = {0.01, 0.01, 0.01};
    const ProjectedGaussians proj = project(act, cam);
    // (100 * 0.01 / 2)^2 = 0.25 on each diagonal entry, zero off-diagonal
    CHECK(proj.cov2d[0] - kCovarianceFloor == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(proj.cov2d[2] - kCovarianceFloor == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(proj.cov2d[1] == doctest::Approx(0.0));
}

TEST_CASE("project: point behind the camera is masked invalid, not an error") {
    Camera cam = identity_camera(64, 64, 100.0);
    ActivatedCloud act = make_act(2);
    act.positions = {0.0, 0.0, -1.0, 0.0, 0.0, 2.0};
    const ProjectedGaussians proj = project(act, cam);
    CHECK(proj.valid[0] == 0);
    CHECK(proj.valid[1] == 1);
}

TEST_CASE("bin_tiles: containment, straddling, and the depth tie rule") {
    Camera cam = identity_camera(64, 64, 400.0);
    ActivatedCloud act = make_act(3);
    // small Gaussian inside tile (0,0); one straddling tiles 0 and 1 in x;
    // third shares the depth of the first (tie -> lower index first).
    act.scales.assign(9, 0.002);
    act.positions = {
        -0.12, -0.12, 2.0, // u = 32 - 24 = 8  -> tile 0
        0.0,  -0.12, 2.0,  // u = 32 (boundary region), straddles with big scale
        -0.115, -0.12, 2.0 // tile 0, same depth as first
    };
    act.scales[3] = 0.02; // widen only the straddler in x
    const ProjectedGaussians proj = project(act, cam);
    const TileBins bins = bin_tiles(proj, cam, 16);
    REQUIRE(bins.tiles_x == 4);

    int appearances = 0;
    for (const auto& list : bins.lists)
        for (auto idx : list)
            if (idx == 0)
                ++appearances;
    CHECK(appearances == 1);

    // straddler: present in at least two tiles of row 1 region
    int tiles_with_1 = 0;
    for (const auto& list : bins.lists)
        for (auto idx : list)
            if (idx == 1)
                ++tiles_with_1;
    CHECK(tiles_with_1 >= 2);

    // tie rule inside tile (1,0)... find the tile containing both 0 and 2
    for (const auto& list : bins.lists) {
        bool has0 = false, has2 = false;
        for (auto idx : list) {
            if (idx == 0)
                has0 = true;
            if (idx == 2)
                has2 = true;
        }
        if (has0 && has2) {
            std::size_t p0 = 0, p2 = 0;
            for (std::size_t k = 0; k < list.size(); ++k) {
                if (list[k] == 0)
                    p0 = k;
                if (list[k] == 2)
                    p2 = k;
            }
            CHECK(p0 < p2);
        }
    }
}

TEST_CASE("composite: empty scene gives background and zero alpha") {
    Camera cam = identity_camera(32, 32, 100.0);
    ActivatedCloud act = make_act(1);
    act.positions = {0.0, 0.0, -5.0}; // culled
    const Eigen::Vector3d bg(0.2, 0.4, 0.6);
    const RenderOutput out = render(act, cam, bg);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(out.rgb.at(y, x, 0) == doctest::Approx(0.2));
            CHECK(out.rgb.at(y, x, 1) == doctest::Approx(0.4));
            CHECK(out.rgb.at(y, x, 2) == doctest::Approx(0.6));
            CHECK(out.alpha.at(y, x, 0) == 0.0);
        }
}

TEST_CASE("composite: opaque Gaussian at pixel center follows the clipped weight rule") {
    // With alpha = 1 the weight clips at 0.99, so the pixel reads
    // 0.99 c + 0.01 bg; with bg equal to the color it is the color exactly.
    Camera cam = identity_camera(32, 32, 100.0);
    ActivatedCloud act = make_act(1);
    act.positions = {0.0, 0.0, 2.0};
    act.scales.assign(3, 0.2);
    act.opacities[0] = 1.0;
    const double color = 0.75;
    act.sh_coeffs = {sh_dc_for(color), sh_dc_for(color), sh_dc_for(color)};

    const RenderOutput black = render(act, cam, {0, 0, 0});
    // cx = 16 -> pixel (y=15..16, x=15..16) centers at 15.5/16.5; mean2d = 16.0
    // exactly between. Use the analytic weight at the evaluated offset instead.
    const double inv = 1.0 / (kCovarianceFloor + 100.0 * 100.0 * 0.2 * 0.2 / 4.0);
    const double q = inv * (0.5 * 0.5 + 0.5 * 0.5);
    const double w = std::min(std::exp(-0.5 * q), kWeightClip);
    CHECK(black.rgb.at(16, 16, 0) == doctest::Approx(w * color).epsilon(1e-12));

    const RenderOutput matched = render(act, cam, {color, color, color});
    CHECK(matched.rgb.at(16, 16, 0) == doctest::Approx(color).epsilon(1e-12));
}

TEST_CASE("composite: two stacked Gaussians follow hand alpha compositing") {
    Camera cam = identity_camera(32, 32, 100.0);
    cam.cx = 15.5; // put the mean exactly on the pixel (15,15) center
    cam.cy = 15.5;
    ActivatedCloud act = make_act(2);
    act.positions = {0.0, 0.0, 2.0, 0.0, 0.0, 4.0};
    // huge flat Gaussians so the falloff at the center pixel is exactly 1
    act.scales.assign(6, 1.0);
    act.opacities = {0.5, 1.0};
    const double cf = 0.8, cb = 0.4;
    act.sh_coeffs = {sh_dc_for(cf), sh_dc_for(cf), sh_dc_for(cf),
                     sh_dc_for(cb), sh_dc_for(cb), sh_dc_for(cb)};

    const RenderOutput out = render(act, cam, {0, 0, 0});
    // front: w = 0.5, T -> 0.5; back: w = min(1, 0.99) = 0.99 -> adds 0.5*0.99*cb
    const double expected = 0.5 * cf + 0.5 * 0.99 * cb;
    CHECK(out.rgb.at(15, 15, 0) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(out.alpha.at(15, 15, 0) == doctest::Approx(1.0 - 0.5 * 0.01).epsilon(1e-9));
}

TEST_CASE("latent channels composite with the same weights as color") {
    Camera cam = identity_camera(32, 32, 100.0);
    cam.cx = 15.5;
    cam.cy = 15.5;
    ActivatedCloud act = make_act(1, 0, 3);
    act.positions = {0.0, 0.0, 2.0};
    act.scales.assign(3, 1.0);
    act.opacities = {0.6};
    act.cnn_features = {1.0, -2.0, 0.5};
    const RenderOutput out = render(act, cam, {0, 0, 0});
    CHECK(out.latent.at(15, 15, 0) == doctest::Approx(0.6 * 1.0));
    CHECK(out.latent.at(15, 15, 1) == doctest::Approx(0.6 * -2.0));
    CHECK(out.latent.at(15, 15, 2) == doctest::Approx(0.6 * 0.5));
}

namespace {
ActivatedCloud random_scene(Rng& rng, std::size_t n, int sh_degree, int ch) {
    ActivatedCloud act = make_act(n, sh_degree, ch);
    for (std::size_t i = 0; i < n; ++i) {
        act.positions[i * 3] = rng.uniform(-0.7, 0.7);
        act.positions[i * 3 + 1] = rng.uniform(-0.7, 0.7);
        act.positions[i * 3 + 2] = rng.uniform(1.2, 3.5);
        double qn = 0.0;
        for (int k = 0; k < 4; ++k) {
            act.rotations[i * 4 + k] = rng.normal();
            qn += act.rotations[i * 4 + k] * act.rotations[i * 4 + k];
        }
        qn = std::sqrt(qn);
        for (int k = 0; k < 4; ++k)
            act.rotations[i * 4 + k] /= qn;
        for (int k = 0; k < 3; ++k)
            act.scales[i * 3 + k] = std::exp(rng.uniform(-4.5, -2.0));
        act.opacities[i] = rng.uniform(0.05, 0.7);
        const int coeffs = (sh_degree + 1) * (sh_degree + 1);
        for (int m = 0; m < coeffs * 3; ++m)
            act.sh_coeffs[i * coeffs * 3 + m] = (m < 3) ? rng.uniform(-0.8, 0.8) : rng.uniform(-0.2, 0.2);
        for (int m = 0; m < ch; ++m)
            act.cnn_features[i * ch + m] = rng.uniform(-1.0, 1.0);
    }
    return act;
}
} // namespace

TEST_CASE("tile renderer equals the brute-force reference away from early stops") {
    Rng rng(2024);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 20 + static_cast<std::size_t>(rng.uniform_int(180));
        const ActivatedCloud act = random_scene(rng, n, trial % 2, 2);
        Camera cam = identity_camera(48, 48, 60.0);
        const Eigen::Vector3d bg(0.1, 0.2, 0.3);
        const RenderOutput tile = render(act, cam, bg);
        const RenderOutput ref = render_reference(act, cam, bg);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * 48 + x;
                if (tile.cache.final_transmittance[pix] < kStopTransmittance)
                    continue; // early stop engaged; reference keeps going
                for (int c = 0; c < 3; ++c)
                    CHECK(std::abs(tile.rgb.at(y, x, c) - ref.rgb.at(y, x, c)) < 1e-6);
                for (int c = 0; c < 2; ++c)
                    CHECK(std::abs(tile.latent.at(y, x, c) - ref.latent.at(y, x, c)) < 1e-6);
                CHECK(std::abs(tile.alpha.at(y, x, 0) - ref.alpha.at(y, x, 0)) < 1e-6);
            }
    }
}

TEST_CASE("rendering is invariant to primitive permutation at distinct depths") {
    Rng rng(5);
    ActivatedCloud act = random_scene(rng, 24, 1, 2);
    for (std::size_t i = 0; i < 24; ++i)
        act.positions[i * 3 + 2] = 1.5 + 0.08 * static_cast<double>(i);
    Camera cam = identity_camera(48, 48, 60.0);

    ActivatedCloud rev = act;
    const std::size_t n = act.size();
    auto permute = [&](const std::vector<double>& src, std::vector<double>& dst, int dim) {
        for (std::size_t i = 0; i < n; ++i)
            for (int d = 0; d < dim; ++d)
                dst[(n - 1 - i) * dim + d] = src[i * dim + d];
    };
    permute(act.positions, rev.positions, 3);
    permute(act.rotations, rev.rotations, 4);
    permute(act.scales, rev.scales, 3);
    permute(act.opacities, rev.opacities, 1);
    permute(act.sh_coeffs, rev.sh_coeffs, 12);
    permute(act.cnn_features, rev.cnn_features, 2);

    const RenderOutput a = render(act, cam, {0, 0, 0});
    const RenderOutput b = render(rev, cam, {0, 0, 0});
    for (std::size_t i = 0; i < a.rgb.data.size(); ++i)
        CHECK(a.rgb.data[i] == b.rgb.data[i]);
    for (std::size_t i = 0; i < a.alpha.data.size(); ++i)
        CHECK(a.alpha.data[i] == b.alpha.data[i]);
}

TEST_CASE("alpha map is monotone nondecreasing in any single opacity") {
    Rng rng(7);
    ActivatedCloud act = random_scene(rng, 12, 0, 1);
    Camera cam = identity_camera(32, 32, 50.0);
    const RenderOutput base = render(act, cam, {0, 0, 0});
    for (int trial = 0; trial < 4; ++trial) {
        ActivatedCloud bumped = act;
        const int i = rng.uniform_int(12);
        bumped.opacities[static_cast<std::size_t>(i)] =
            std::min(0.95, bumped.opacities[static_cast<std::size_t>(i)] + 0.2);
        const RenderOutput out = render(bumped, cam, {0, 0, 0});
        for (std::size_t p = 0; p < out.alpha.data.size(); ++p)
            CHECK(out.alpha.data[p] >= base.alpha.data[p] - 1e-12);
    }
}

TEST_CASE("composite_backward: zero output gradient gives zero attribute gradients") {
    Rng rng(9);
    const ActivatedCloud act = random_scene(rng, 6, 1, 2);
    Camera cam = identity_camera(32, 32, 50.0);
    const ProjectedGaussians proj = project(act, cam);
    const TileBins bins = bin_tiles(proj, cam);
    const RenderOutput out = composite(proj, bins, cam, {0, 0, 0});

    Image zrgb(32, 32, 3), zlat(32, 32, 2), zalpha(32, 32, 1);
    OutputGrads og{&zrgb, &zlat, &zalpha};
    const RenderGrads g = composite_backward(act, cam, proj, bins, out, og, {0, 0, 0});
    for (double v : g.act.positions)
        CHECK(v == 0.0);
    for (double v : g.act.opacities)
        CHECK(v == 0.0);
    for (double v : g.view_grad_norm)
        CHECK(v == 0.0);
}

TEST_CASE("composite_backward: center-pixel color gradient flows w * T * Y0 into the DC coefficient") {
    Camera cam = identity_camera(32, 32, 100.0);
    cam.cx = 15.5;
    cam.cy = 15.5;
    ActivatedCloud act = make_act(1, 0, 1);
    act.positions = {0.0, 0.0, 2.0};
    act.scales.assign(3, 1.0);
    act.opacities = {0.6};
    act.sh_coeffs = {sh_dc_for(0.5), sh_dc_for(0.5), sh_dc_for(0.5)};

    const ProjectedGaussians proj = project(act, cam);
    const TileBins bins = bin_tiles(proj, cam);
    const RenderOutput out = composite(proj, bins, cam, {0, 0, 0});

    Image grgb(32, 32, 3);
    grgb.at(15, 15, 0) = 1.0;
    OutputGrads og{&grgb, nullptr, nullptr};
    const RenderGrads g = composite_backward(act, cam, proj, bins, out, og, {0, 0, 0});
    // weight at the center pixel is exactly the opacity (falloff 1), T = 1
    CHECK(g.act.sh_coeffs[0] == doctest::Approx(0.6 * kSh0).epsilon(1e-12));
    CHECK(g.act.sh_coeffs[1] == 0.0);
}

TEST_CASE("full renderer gradients match finite differences on a 3-Gaussian scene") {
    // Primitives sized so no pixel sits near the sigma bound, no weight clips,
    // no early stop, and colors stay away from the clamp.
    Camera cam = identity_camera(16, 16, 30.0);
    GaussianCloud cloud;
    cloud.sh_degree = 1;
    cloud.cnn_feature_dim = 2;
    cloud.resize(3);
    Rng rng(31);
    for (std::size_t i = 0; i < 3; ++i) {
        cloud.positions[i * 3] = rng.uniform(-0.05, 0.05);
        cloud.positions[i * 3 + 1] = rng.uniform(-0.05, 0.05);
        cloud.positions[i * 3 + 2] = 1.8 + 0.3 * static_cast<double>(i);
        for (int k = 0; k < 4; ++k)
            cloud.rotations[i * 4 + k] = rng.normal();
        if (std::abs(cloud.rotations[i * 4]) < 0.2)
            cloud.rotations[i * 4] = 0.7;
        for (int k = 0; k < 3; ++k)
            cloud.log_scales[i * 3 + k] = std::log(0.5) + rng.uniform(-0.1, 0.1);
        cloud.opacity_logits[i] = rng.uniform(-0.5, 0.5);
        for (int m = 0; m < 3; ++m)
            cloud.sh_coeffs[i * 12 + m] = rng.uniform(-0.3, 0.3);
        for (int m = 3; m < 12; ++m)
            cloud.sh_coeffs[i * 12 + m] = rng.uniform(-0.05, 0.05);
        for (int m = 0; m < 2; ++m)
            cloud.cnn_features[i * 2 + m] = rng.uniform(-0.5, 0.5);
    }

    Image lw_rgb(16, 16, 3), lw_lat(16, 16, 2), lw_alpha(16, 16, 1);
    for (auto& v : lw_rgb.data)
        v = rng.uniform(-1, 1);
    for (auto& v : lw_lat.data)
        v = rng.uniform(-1, 1);
    for (auto& v : lw_alpha.data)
        v = rng.uniform(-1, 1);
    const Eigen::Vector3d bg(0.3, 0.3, 0.3);

    auto eval = [&]() {
        const ActivatedCloud act = activate(cloud);
        const RenderOutput out = render(act, cam, bg);
        double s = 0.0;
        for (std::size_t i = 0; i < out.rgb.data.size(); ++i)
            s += lw_rgb.data[i] * out.rgb.data[i];
        for (std::size_t i = 0; i < out.latent.data.size(); ++i)
            s += lw_lat.data[i] * out.latent.data[i];
        for (std::size_t i = 0; i < out.alpha.data.size(); ++i)
            s += lw_alpha.data[i] * out.alpha.data[i];
        return s;
    };

    const ActivatedCloud act = activate(cloud);
    const ProjectedGaussians proj = project(act, cam);
    const TileBins bins = bin_tiles(proj, cam);
    const RenderOutput out = composite(proj, bins, cam, bg);
    OutputGrads og{&lw_rgb, &lw_lat, &lw_alpha};
    const RenderGrads rg = composite_backward(act, cam, proj, bins, out, og, bg);
    const CloudGrads g = activate_backward(cloud, act, rg.act);

    const double h = 1e-5;
    auto fd_block = [&](std::vector<double>& params, const std::vector<double>& analytic) {
        std::vector<double> numeric(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            numeric[i] = central_diff(eval, params[i], h);
        return block_rel_err(analytic, numeric);
    };
    CHECK(fd_block(cloud.positions, g.positions) < 1e-4);
    CHECK(fd_block(cloud.rotations, g.rotations) < 1e-4);
    CHECK(fd_block(cloud.log_scales, g.log_scales) < 1e-4);
    CHECK(fd_block(cloud.opacity_logits, g.opacity_logits) < 1e-4);
    CHECK(fd_block(cloud.sh_coeffs, g.sh_coeffs) < 1e-4);
    CHECK(fd_block(cloud.cnn_features, g.cnn_features) < 1e-4);
}
