#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dynsplat/image.hpp"
#include "dynsplat/rng.hpp"

namespace dynsplat {

// Screen-space residual refiner: three 3x3 convolutions with rectifiers in
// between, zero-padded, final 3-channel output added to the input color
// channels. The last layer is zero-initialized so refinement starts as the
// identity on colors.
struct ConvNetParams {
    int in_channels = 11;     // 3 + C_h
    int hidden_channels = 32;
    std::vector<Eigen::MatrixXd> weights; // (C_out x C_in*9); kernel index c*9 + ky*3 + kx
    std::vector<Eigen::VectorXd> biases;

    int layer_count() const { return static_cast<int>(weights.size()); }
    std::size_t parameter_count() const;
    void validate() const;

    static ConvNetParams create(int cnn_feature_dim, int hidden, Rng& rng);
};

struct CnnCache {
    int height = 0, width = 0;
    Eigen::MatrixXd input;             // (C_in x H*W)
    std::vector<Eigen::MatrixXd> pre;  // pre-activation feature maps
    std::vector<Eigen::MatrixXd> post; // rectified maps (empty for last layer)
};

struct CnnGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void resize_like(const ConvNetParams& params);
    void set_zero();
};

// input: [H][W][3+C_h] (color then latent channels); returns [H][W][3].
// Requires H, W >= 8; throws DataError on channel mismatch.
Image cnn_forward(const ConvNetParams& params, const Image& input, CnnCache& cache);

// grad_output: [H][W][3]. Returns gradient w.r.t. the full input (color
// channels include the residual path); parameter grads accumulate.
Image cnn_backward(const ConvNetParams& params, const CnnCache& cache, const Image& grad_output,
                   CnnGrads& grads);

} // namespace dynsplat
