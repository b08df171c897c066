#include "dynsplat/adam.hpp"

#include <cmath>

#include "dynsplat/errors.hpp"

namespace dynsplat {

void adam_step(double* params, const double* grads, std::size_t n, AdamState& state, double lr,
               double weight_decay, const std::string& name) {
    if (state.m.size() != n || state.v.size() != n)
        throw DataError("adam_step: state shape mismatch for " + name);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads[i]))
            throw NumericalError("adam_step: non-finite gradient in " + name + " at index " +
                                 std::to_string(i));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        if (weight_decay > 0.0)
            params[i] -= lr * weight_decay * params[i];
    }
}

} // namespace dynsplat
