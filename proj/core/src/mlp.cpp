#include "dynsplat/mlp.hpp"

#include <cmath>
#include <string>

#include "dynsplat/errors.hpp"

namespace dynsplat {

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l)
        n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
    return n;
}

void MlpParams::validate() const {
    if (weights.empty() || weights.size() != biases.size())
        throw DataError("mlp: empty or mismatched layer lists");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows())
            throw DataError("mlp: bias length mismatch at layer " + std::to_string(l));
        if (l > 0 && weights[l].cols() != weights[l - 1].rows())
            throw DataError("mlp: layer shapes do not chain at layer " + std::to_string(l));
        if (!weights[l].allFinite() || !biases[l].allFinite())
            throw DataError("mlp: non-finite parameter at layer " + std::to_string(l));
    }
}

MlpParams MlpParams::create(int input_dim, int output_dim, int layers, int hidden, Rng& rng,
                            bool zero_init_last) {
    if (layers < 1 || input_dim < 1 || output_dim < 1 || (layers > 1 && hidden < 1))
        throw DataError("mlp: invalid architecture");
    MlpParams p;
    p.weights.resize(static_cast<std::size_t>(layers));
    p.biases.resize(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
        const int in = (l == 0) ? input_dim : hidden;
        const int out = (l == layers - 1) ? output_dim : hidden;
        p.weights[l].resize(out, in);
        p.biases[l] = Eigen::VectorXd::Zero(out);
        if (l == layers - 1 && zero_init_last) {
            p.weights[l].setZero();
        } else {
            const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
            for (int r = 0; r < out; ++r)
                for (int c = 0; c < in; ++c)
                    p.weights[l](r, c) = std_dev * rng.normal();
        }
    }
    return p;
}

void MlpGrads::resize_like(const MlpParams& params) {
    weights.resize(params.weights.size());
    biases.resize(params.biases.size());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        weights[l] = Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols());
        biases[l] = Eigen::VectorXd::Zero(params.biases[l].size());
    }
}

void MlpGrads::set_zero() {
    for (auto& w : weights)
        w.setZero();
    for (auto& b : biases)
        b.setZero();
}

void MlpGrads::axpy(double alpha, const MlpGrads& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += alpha * other.weights[l];
        biases[l] += alpha * other.biases[l];
    }
}

void mlp_forward(const MlpParams& params, const double* inputs, std::size_t batch,
                 std::vector<double>& outputs, MlpCache& cache) {
    const int layers = params.layer_count();
    const int din = params.input_dim();
    const int dout = params.output_dim();
    if (layers == 0)
        throw DataError("mlp_forward: empty network");

    // Row-major [B][D] memory is a column-major (D x B) matrix; no copy needed
    // beyond the cache's own storage.
    cache.batch = batch;
    cache.input = Eigen::Map<const Eigen::MatrixXd>(inputs, din, static_cast<Eigen::Index>(batch));
    cache.pre.resize(static_cast<std::size_t>(layers));
    cache.post.resize(static_cast<std::size_t>(layers));

    const Eigen::MatrixXd* current = &cache.input;
    for (int l = 0; l < layers; ++l) {
        if (current->rows() != params.weights[l].cols())
            throw DataError("mlp_forward: input dimension mismatch at layer " + std::to_string(l));
        cache.pre[l].noalias() = params.weights[l] * (*current);
        cache.pre[l].colwise() += params.biases[l];
        if (l + 1 < layers) {
            cache.post[l] = cache.pre[l].cwiseMax(0.0);
            current = &cache.post[l];
        } else {
            cache.post[l].resize(0, 0);
        }
    }
    outputs.resize(batch * static_cast<std::size_t>(dout));
    Eigen::Map<Eigen::MatrixXd>(outputs.data(), dout, static_cast<Eigen::Index>(batch)) =
        cache.pre[static_cast<std::size_t>(layers - 1)];
}

void mlp_backward(const MlpParams& params, const MlpCache& cache, const double* grad_output,
                  std::vector<double>& grad_inputs, MlpGrads& grads) {
    const int layers = params.layer_count();
    const int din = params.input_dim();
    const int dout = params.output_dim();
    const auto batch = static_cast<Eigen::Index>(cache.batch);
    if (static_cast<int>(cache.pre.size()) != layers || cache.input.rows() != din)
        throw DataError("mlp_backward: stale cache");

    Eigen::MatrixXd g = Eigen::Map<const Eigen::MatrixXd>(grad_output, dout, batch);
    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
        grads.weights[l].noalias() += g * layer_in.transpose();
        grads.biases[l] += g.rowwise().sum();
        Eigen::MatrixXd g_prev;
        g_prev.noalias() = params.weights[l].transpose() * g;
        if (l > 0) {
            // Rectifier derivative against the previous layer's pre-activation.
            g_prev = (cache.pre[l - 1].array() > 0.0).select(g_prev, 0.0);
        }
        g = std::move(g_prev);
    }
    grad_inputs.resize(static_cast<std::size_t>(batch) * din);
    Eigen::Map<Eigen::MatrixXd>(grad_inputs.data(), din, batch) = g;
}

} // namespace dynsplat
