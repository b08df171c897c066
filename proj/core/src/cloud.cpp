#include "dynsplat/cloud.hpp"

#include <cmath>
#include <fstream>

#include "dynsplat/errors.hpp"
#include "dynsplat/io_util.hpp"

namespace dynsplat {

void GaussianCloud::resize(std::size_t n) {
    positions.assign(n * 3, 0.0);
    rotations.assign(n * 4, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        rotations[i * 4] = 1.0;
    log_scales.assign(n * 3, 0.0);
    opacity_logits.assign(n, 0.0);
    sh_coeffs.assign(n * static_cast<std::size_t>(sh_dim()), 0.0);
    dyn_features.assign(n * kDynFeatureDim, 0.0);
    cnn_features.assign(n * static_cast<std::size_t>(cnn_feature_dim), 0.0);
}

void GaussianCloud::validate() const {
    const std::size_t n = size();
    if (n < 1)
        throw DataError("cloud must hold at least one primitive");
    if (sh_degree != 0 && sh_degree != 1)
        throw DataError("sh_degree must be 0 or 1");
    if (cnn_feature_dim < 1)
        throw DataError("cnn_feature_dim must be positive");
    auto check = [&](const std::vector<double>& a, std::size_t dim, const char* name) {
        if (a.size() != n * dim)
            throw DataError(std::string("cloud attribute ") + name + " has wrong length");
    };
    check(positions, 3, "positions");
    check(rotations, 4, "rotations");
    check(log_scales, 3, "log_scales");
    check(opacity_logits, 1, "opacity_logits");
    check(sh_coeffs, static_cast<std::size_t>(sh_dim()), "sh_coeffs");
    check(dyn_features, kDynFeatureDim, "dyn_features");
    check(cnn_features, static_cast<std::size_t>(cnn_feature_dim), "cnn_features");
    auto all_finite = [&](const std::vector<double>& a, const char* name) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!std::isfinite(a[i]))
                throw DataError(std::string("non-finite value in ") + name + " at primitive " +
                                std::to_string(i / (a.size() / n)));
    };
    all_finite(positions, "positions");
    all_finite(rotations, "rotations");
    all_finite(log_scales, "log_scales");
    all_finite(opacity_logits, "opacity_logits");
    all_finite(sh_coeffs, "sh_coeffs");
    all_finite(dyn_features, "dyn_features");
    all_finite(cnn_features, "cnn_features");
}

void CloudGrads::resize_like(const GaussianCloud& cloud) {
    positions.assign(cloud.positions.size(), 0.0);
    rotations.assign(cloud.rotations.size(), 0.0);
    log_scales.assign(cloud.log_scales.size(), 0.0);
    opacity_logits.assign(cloud.opacity_logits.size(), 0.0);
    sh_coeffs.assign(cloud.sh_coeffs.size(), 0.0);
    cnn_features.assign(cloud.cnn_features.size(), 0.0);
}

void CloudGrads::set_zero() {
    std::fill(positions.begin(), positions.end(), 0.0);
    std::fill(rotations.begin(), rotations.end(), 0.0);
    std::fill(log_scales.begin(), log_scales.end(), 0.0);
    std::fill(opacity_logits.begin(), opacity_logits.end(), 0.0);
    std::fill(sh_coeffs.begin(), sh_coeffs.end(), 0.0);
    std::fill(cnn_features.begin(), cnn_features.end(), 0.0);
}

void ActGrads::resize_like(const ActivatedCloud& act) {
    positions.assign(act.positions.size(), 0.0);
    rotations.assign(act.rotations.size(), 0.0);
    scales.assign(act.scales.size(), 0.0);
    opacities.assign(act.opacities.size(), 0.0);
    sh_coeffs.assign(act.sh_coeffs.size(), 0.0);
    cnn_features.assign(act.cnn_features.size(), 0.0);
}

void ActGrads::set_zero() {
    std::fill(positions.begin(), positions.end(), 0.0);
    std::fill(rotations.begin(), rotations.end(), 0.0);
    std::fill(scales.begin(), scales.end(), 0.0);
    std::fill(opacities.begin(), opacities.end(), 0.0);
    std::fill(sh_coeffs.begin(), sh_coeffs.end(), 0.0);
    std::fill(cnn_features.begin(), cnn_features.end(), 0.0);
}

ActivatedCloud activate(const GaussianCloud& cloud) {
    const std::size_t n = cloud.size();
    auto reject_nonfinite = [&](double v, std::size_t i, const char* what) {
        if (!std::isfinite(v))
            throw DataError(std::string("non-finite ") + what + " at primitive " + std::to_string(i));
    };
    ActivatedCloud act;
    act.sh_degree = cloud.sh_degree;
    act.cnn_feature_dim = cloud.cnn_feature_dim;
    act.positions = cloud.positions;
    act.sh_coeffs = cloud.sh_coeffs;
    act.cnn_features = cloud.cnn_features;
    act.rotations.resize(n * 4);
    act.scales.resize(n * 3);
    act.opacities.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* q = &cloud.rotations[i * 4];
        double norm2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            reject_nonfinite(q[k], i, "quaternion");
            norm2 += q[k] * q[k];
        }
        const double norm = std::sqrt(norm2);
        if (!(norm > 0.0))
            throw DataError("zero-norm quaternion at primitive " + std::to_string(i));
        for (int k = 0; k < 4; ++k)
            act.rotations[i * 4 + k] = q[k] / norm;
        for (int k = 0; k < 3; ++k) {
            const double ls = cloud.log_scales[i * 3 + k];
            reject_nonfinite(ls, i, "log_scale");
            act.scales[i * 3 + k] = std::exp(ls);
        }
        const double logit = cloud.opacity_logits[i];
        reject_nonfinite(logit, i, "opacity logit");
        act.opacities[i] = sigmoid(logit);
        for (int k = 0; k < 3; ++k)
            reject_nonfinite(cloud.positions[i * 3 + k], i, "position");
    }
    return act;
}

CloudGrads activate_backward(const GaussianCloud& cloud, const ActivatedCloud& act,
                             const ActGrads& grads) {
    const std::size_t n = cloud.size();
    CloudGrads out;
    out.resize_like(cloud);
    out.positions = grads.positions;
    out.sh_coeffs = grads.sh_coeffs;
    out.cnn_features = grads.cnn_features;
    for (std::size_t i = 0; i < n; ++i) {
        // d(q/|q|)/dq = (I - u u^T) / |q| with u = q/|q|
        const double* q = &cloud.rotations[i * 4];
        const double* u = &act.rotations[i * 4];
        const double* gu = &grads.rotations[i * 4];
        const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        const double dot = gu[0] * u[0] + gu[1] * u[1] + gu[2] * u[2] + gu[3] * u[3];
        for (int k = 0; k < 4; ++k)
            out.rotations[i * 4 + k] = (gu[k] - dot * u[k]) / norm;
        for (int k = 0; k < 3; ++k)
            out.log_scales[i * 3 + k] = grads.scales[i * 3 + k] * act.scales[i * 3 + k];
        const double a = act.opacities[i];
        out.opacity_logits[i] = grads.opacities[i] * a * (1.0 - a);
    }
    return out;
}

namespace {
constexpr std::uint32_t kCloudVersion = 1;
}

void write_cloud(const std::string& path, const GaussianCloud& cloud, int expr_dim) {
    cloud.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError("cannot open for writing: " + path);
    os.write("NPGC", 4);
    write_u32(os, kCloudVersion);
    write_u32(os, static_cast<std::uint32_t>(cloud.size()));
    write_u32(os, static_cast<std::uint32_t>(cloud.sh_degree));
    write_u32(os, static_cast<std::uint32_t>(cloud.cnn_feature_dim));
    write_u32(os, static_cast<std::uint32_t>(expr_dim));
    write_f32_array(os, cloud.positions);
    write_f32_array(os, cloud.rotations);
    write_f32_array(os, cloud.log_scales);
    write_f32_array(os, cloud.opacity_logits);
    write_f32_array(os, cloud.sh_coeffs);
    write_f32_array(os, cloud.dyn_features);
    write_f32_array(os, cloud.cnn_features);
    if (!os)
        throw DataError("write failed: " + path);
}

GaussianCloud read_cloud(const std::string& path, int* expr_dim) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "NPGC")
        throw DataError("bad cloud magic: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kCloudVersion)
        throw DataError("unsupported cloud version " + std::to_string(version) + ": " + path);
    const std::uint32_t n = read_u32(is);
    GaussianCloud cloud;
    cloud.sh_degree = static_cast<int>(read_u32(is));
    cloud.cnn_feature_dim = static_cast<int>(read_u32(is));
    const int dz = static_cast<int>(read_u32(is));
    if (expr_dim)
        *expr_dim = dz;
    read_f32_array(is, cloud.positions, n * 3);
    read_f32_array(is, cloud.rotations, n * 4);
    read_f32_array(is, cloud.log_scales, n * 3);
    read_f32_array(is, cloud.opacity_logits, n);
    read_f32_array(is, cloud.sh_coeffs, n * static_cast<std::size_t>(cloud.sh_dim()));
    read_f32_array(is, cloud.dyn_features, n * GaussianCloud::kDynFeatureDim);
    read_f32_array(is, cloud.cnn_features, n * static_cast<std::size_t>(cloud.cnn_feature_dim));
    cloud.validate();
    return cloud;
}

} // namespace dynsplat
