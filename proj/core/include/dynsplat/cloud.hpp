#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace dynsplat {

// Canonical primitive set, raw (pre-activation) parameters.
// All arrays share leading dimension N; layouts are row-major [N][dim].
struct GaussianCloud {
    static constexpr int kDynFeatureDim = 8;

    int sh_degree = 1;       // L in {0, 1}
    int cnn_feature_dim = 8; // C_h

    std::vector<double> positions;      // [N][3]
    std::vector<double> rotations;      // [N][4] raw quaternions (w, x, y, z)
    std::vector<double> log_scales;     // [N][3]
    std::vector<double> opacity_logits; // [N][1]
    std::vector<double> sh_coeffs;      // [N][3*(L+1)^2], channel-major per coeff: (coeff, rgb)
    std::vector<double> dyn_features;   // [N][8]
    std::vector<double> cnn_features;   // [N][C_h]

    std::size_t size() const { return positions.size() / 3; }
    int sh_dim() const { return 3 * (sh_degree + 1) * (sh_degree + 1); }
    int sh_coeff_count() const { return (sh_degree + 1) * (sh_degree + 1); }

    void resize(std::size_t n);
    // Throws DataError when invariants are broken (shape mismatch, bad SH degree,
    // non-finite values).
    void validate() const;
};

// Activation image of a cloud: unit quaternions, positive scales, opacities in (0,1).
struct ActivatedCloud {
    int sh_degree = 1;
    int cnn_feature_dim = 8;
    std::vector<double> positions;
    std::vector<double> rotations; // unit quaternions
    std::vector<double> scales;    // exp(log_scales)
    std::vector<double> opacities; // sigmoid(logits)
    std::vector<double> sh_coeffs;
    std::vector<double> cnn_features;

    std::size_t size() const { return positions.size() / 3; }
    int sh_coeff_count() const { return (sh_degree + 1) * (sh_degree + 1); }
};

// Gradients with the raw cloud's shapes.
struct CloudGrads {
    std::vector<double> positions;
    std::vector<double> rotations;
    std::vector<double> log_scales;
    std::vector<double> opacity_logits;
    std::vector<double> sh_coeffs;
    std::vector<double> cnn_features;

    void resize_like(const GaussianCloud& cloud);
    void set_zero();
};

// Gradients with activated shapes.
struct ActGrads {
    std::vector<double> positions;
    std::vector<double> rotations;
    std::vector<double> scales;
    std::vector<double> opacities;
    std::vector<double> sh_coeffs;
    std::vector<double> cnn_features;

    void resize_like(const ActivatedCloud& act);
    void set_zero();
};

// Rejects non-finite raw parameters naming the offending primitive.
ActivatedCloud activate(const GaussianCloud& cloud);

// Chains gradients w.r.t. activated values back to raw parameters.
CloudGrads activate_backward(const GaussianCloud& cloud, const ActivatedCloud& act,
                             const ActGrads& grads);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

// Binary cloud file ("NPGC"): version, N, L, C_h, D_z header, then attribute
// arrays in declaration order as little-endian float32. D_z is carried for
// pairing with a dynamics module; the cloud itself does not use it.
void write_cloud(const std::string& path, const GaussianCloud& cloud, int expr_dim);
GaussianCloud read_cloud(const std::string& path, int* expr_dim = nullptr);

} // namespace dynsplat
