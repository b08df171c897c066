#include "dynsplat/cnn.hpp"

#include <cmath>
#include <string>

#include "dynsplat/errors.hpp"
#include "dynsplat/threading.hpp"

namespace dynsplat {

namespace {

// col(c*9 + ky*3 + kx, y*W + x) = feat(c, (y+ky-1)*W + (x+kx-1)), zero outside.
void im2col(const Eigen::MatrixXd& feat, int height, int width, Eigen::MatrixXd& col) {
    const int channels = static_cast<int>(feat.rows());
    col.resize(channels * 9, static_cast<Eigen::Index>(height) * width);
    parallel_for(static_cast<std::int64_t>(height), [&](std::int64_t y0, std::int64_t y1) {
        for (std::int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < width; ++x) {
                const Eigen::Index p = y * width + x;
                for (int ky = 0; ky < 3; ++ky) {
                    const std::int64_t yy = y + ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        const std::int64_t xx = x + kx - 1;
                        const bool inside = yy >= 0 && yy < height && xx >= 0 && xx < width;
                        for (int c = 0; c < channels; ++c)
                            col(c * 9 + ky * 3 + kx, p) =
                                inside ? feat(c, yy * width + xx) : 0.0;
                    }
                }
            }
        }
    });
}

// Adjoint of im2col in gather form (deterministic, no write contention).
void col2im_adjoint(const Eigen::MatrixXd& dcol, int height, int width, Eigen::MatrixXd& dfeat) {
    const int channels = static_cast<int>(dcol.rows()) / 9;
    dfeat.resize(channels, static_cast<Eigen::Index>(height) * width);
    parallel_for(static_cast<std::int64_t>(height), [&](std::int64_t y0, std::int64_t y1) {
        for (std::int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < width; ++x) {
                const Eigen::Index p = y * width + x;
                for (int c = 0; c < channels; ++c) {
                    double acc = 0.0;
                    for (int ky = 0; ky < 3; ++ky) {
                        const std::int64_t yq = y + 1 - ky;
                        if (yq < 0 || yq >= height)
                            continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const std::int64_t xq = x + 1 - kx;
                            if (xq < 0 || xq >= width)
                                continue;
                            acc += dcol(c * 9 + ky * 3 + kx, yq * width + xq);
                        }
                    }
                    dfeat(c, p) = acc;
                }
            }
        }
    });
}

// Column-partitioned GEMM: out = weight * col (+ bias), deterministic per column.
void gemm_cols(const Eigen::MatrixXd& weight, const Eigen::MatrixXd& col,
               const Eigen::VectorXd* bias, Eigen::MatrixXd& out) {
    out.resize(weight.rows(), col.cols());
    parallel_for(col.cols(), [&](std::int64_t b0, std::int64_t b1) {
        out.middleCols(b0, b1 - b0).noalias() = weight * col.middleCols(b0, b1 - b0);
        if (bias)
            out.middleCols(b0, b1 - b0).colwise() += *bias;
    });
}

} // namespace

std::size_t ConvNetParams::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l)
        n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
    return n;
}

void ConvNetParams::validate() const {
    if (weights.size() != 3 || biases.size() != 3)
        throw DataError("cnn: expected 3 convolution layers");
    if (weights[0].cols() != static_cast<Eigen::Index>(in_channels) * 9)
        throw DataError("cnn: first layer must take 3 + C_h input channels");
    if (weights.back().rows() != 3)
        throw DataError("cnn: last layer must emit 3 channels");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows())
            throw DataError("cnn: bias mismatch at layer " + std::to_string(l));
        if (l > 0 && weights[l].cols() != weights[l - 1].rows() * 9)
            throw DataError("cnn: layer shapes do not chain at layer " + std::to_string(l));
        if (!weights[l].allFinite() || !biases[l].allFinite())
            throw DataError("cnn: non-finite parameter at layer " + std::to_string(l));
    }
}

ConvNetParams ConvNetParams::create(int cnn_feature_dim, int hidden, Rng& rng) {
    ConvNetParams p;
    p.in_channels = 3 + cnn_feature_dim;
    p.hidden_channels = hidden;
    const int chans[4] = {p.in_channels, hidden, hidden, 3};
    p.weights.resize(3);
    p.biases.resize(3);
    for (int l = 0; l < 3; ++l) {
        const int fan_in = chans[l] * 9;
        p.weights[l].resize(chans[l + 1], fan_in);
        p.biases[l] = Eigen::VectorXd::Zero(chans[l + 1]);
        if (l == 2) {
            p.weights[l].setZero();
        } else {
            const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (int r = 0; r < p.weights[l].rows(); ++r)
                for (int c = 0; c < fan_in; ++c)
                    p.weights[l](r, c) = std_dev * rng.normal();
        }
    }
    return p;
}

void CnnGrads::resize_like(const ConvNetParams& params) {
    weights.resize(params.weights.size());
    biases.resize(params.biases.size());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        weights[l] = Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols());
        biases[l] = Eigen::VectorXd::Zero(params.biases[l].size());
    }
}

void CnnGrads::set_zero() {
    for (auto& w : weights)
        w.setZero();
    for (auto& b : biases)
        b.setZero();
}

Image cnn_forward(const ConvNetParams& params, const Image& input, CnnCache& cache) {
    params.validate();
    if (input.channels != params.in_channels)
        throw DataError("cnn_forward: expected " + std::to_string(params.in_channels) +
                        " channels, got " + std::to_string(input.channels));
    if (input.height < 8 || input.width < 8)
        throw DataError("cnn_forward: image must be at least 8x8");

    const int h = input.height, w = input.width;
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    cache.height = h;
    cache.width = w;
    cache.input.resize(params.in_channels, hw);
    for (Eigen::Index p = 0; p < hw; ++p)
        for (int c = 0; c < params.in_channels; ++c)
            cache.input(c, p) = input.data[static_cast<std::size_t>(p) * params.in_channels + c];

    const int layers = params.layer_count();
    cache.pre.resize(static_cast<std::size_t>(layers));
    cache.post.resize(static_cast<std::size_t>(layers));
    Eigen::MatrixXd col;
    const Eigen::MatrixXd* current = &cache.input;
    for (int l = 0; l < layers; ++l) {
        im2col(*current, h, w, col);
        gemm_cols(params.weights[l], col, &params.biases[l], cache.pre[l]);
        if (l + 1 < layers) {
            cache.post[l] = cache.pre[l].cwiseMax(0.0);
            current = &cache.post[l];
        } else {
            cache.post[l].resize(0, 0);
        }
    }

    Image out(h, w, 3);
    const Eigen::MatrixXd& residual = cache.pre.back();
    for (Eigen::Index p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c)
            out.data[static_cast<std::size_t>(p) * 3 + c] =
                input.data[static_cast<std::size_t>(p) * params.in_channels + c] + residual(c, p);
    return out;
}

Image cnn_backward(const ConvNetParams& params, const CnnCache& cache, const Image& grad_output,
                   CnnGrads& grads) {
    const int h = cache.height, w = cache.width;
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    if (grad_output.height != h || grad_output.width != w || grad_output.channels != 3)
        throw DataError("cnn_backward: gradient shape mismatch");

    Eigen::MatrixXd g(3, hw);
    for (Eigen::Index p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c)
            g(c, p) = grad_output.data[static_cast<std::size_t>(p) * 3 + c];

    const int layers = params.layer_count();
    Eigen::MatrixXd col, dcol, dfeat;
    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
        im2col(layer_in, h, w, col);
        // dW row blocks are independent; rows are few so accumulate directly.
        grads.weights[l].noalias() += g * col.transpose();
        grads.biases[l] += g.rowwise().sum();
        dcol.resize(params.weights[l].cols(), hw);
        parallel_for(hw, [&](std::int64_t b0, std::int64_t b1) {
            dcol.middleCols(b0, b1 - b0).noalias() =
                params.weights[l].transpose() * g.middleCols(b0, b1 - b0);
        });
        col2im_adjoint(dcol, h, w, dfeat);
        if (l > 0) {
            g = (cache.pre[l - 1].array() > 0.0).select(dfeat, 0.0);
        } else {
            g = std::move(dfeat);
        }
    }

    Image grad_input(h, w, params.in_channels);
    for (Eigen::Index p = 0; p < hw; ++p) {
        for (int c = 0; c < params.in_channels; ++c)
            grad_input.data[static_cast<std::size_t>(p) * params.in_channels + c] = g(c, p);
        // Residual path: output = input colors + refinement.
        for (int c = 0; c < 3; ++c)
            grad_input.data[static_cast<std::size_t>(p) * params.in_channels + c] +=
                grad_output.data[static_cast<std::size_t>(p) * 3 + c];
    }
    return grad_input;
}

} // namespace dynsplat
