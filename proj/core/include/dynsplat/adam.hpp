#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynsplat {

// Bias-corrected Adam moments for one parameter tensor.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    void init(std::size_t n) {
        step = 0;
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

// Standard bias-corrected update; weight_decay > 0 applies decoupled decay
// (p -= lr * wd * p). Throws NumericalError on non-finite gradients, naming
// the parameter tensor.
void adam_step(double* params, const double* grads, std::size_t n, AdamState& state, double lr,
               double weight_decay = 0.0, const std::string& name = "params");

inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, double lr, double weight_decay = 0.0,
                      const std::string& name = "params") {
    adam_step(params.data(), grads.data(), params.size(), state, lr, weight_decay, name);
}

} // namespace dynsplat
