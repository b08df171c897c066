#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dynsplat/rng.hpp"

namespace dynsplat {

// Fixed-topology multilayer perceptron: linear layers with rectifier
// nonlinearities between them, linear output.
struct MlpParams {
    std::vector<Eigen::MatrixXd> weights; // layer l: (out_l x in_l)
    std::vector<Eigen::VectorXd> biases;

    int layer_count() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
    int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
    std::size_t parameter_count() const;

    void validate() const; // consecutive shapes chain, finite values

    // He-normal hidden layers; `zero_init_last` zeroes the output layer so the
    // network starts as the neutral map.
    static MlpParams create(int input_dim, int output_dim, int layers, int hidden, Rng& rng,
                            bool zero_init_last);
};

struct MlpCache {
    Eigen::MatrixXd input;             // (D_in x B), one column per sample
    std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
    std::vector<Eigen::MatrixXd> post; // post-activation per hidden layer
    std::size_t batch = 0;
};

struct MlpGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void resize_like(const MlpParams& params);
    void set_zero();
    void axpy(double alpha, const MlpGrads& other); // this += alpha * other
};

// inputs / outputs are row-major [B][D]; the cache suffices for an exact
// backward pass. Throws DataError on shape mismatch.
void mlp_forward(const MlpParams& params, const double* inputs, std::size_t batch,
                 std::vector<double>& outputs, MlpCache& cache);

// grad_output row-major [B][D_out]; grad_inputs filled row-major [B][D_in];
// parameter gradients accumulate into `grads`.
void mlp_backward(const MlpParams& params, const MlpCache& cache, const double* grad_output,
                  std::vector<double>& grad_inputs, MlpGrads& grads);

} // namespace dynsplat
