#include "gridflow/adam.hpp"

#include <cmath>

namespace gridflow {

AdamState make_adam_state(std::span<const Tensor> params, double learning_rate) {
    AdamState state;
    state.learning_rate = learning_rate;
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const Tensor& p : params) {
        state.first_moment.emplace_back(static_cast<size_t>(p.numel()), 0.0);
        state.second_moment.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads,
               AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    for (size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].mutable_data();
        const auto g = grads[i];
        if (g.size() != theta.size()) {
            throw ShapeError("adam_step: gradient " + std::to_string(i) + " has " +
                             std::to_string(g.size()) + " values, parameter has " +
                             std::to_string(theta.size()));
        }
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (size_t j = 0; j < theta.size(); ++j) {
            const double gj = g[j];
            if (!std::isfinite(gj)) {
                throw NonFiniteError("adam_step: non-finite gradient in parameter " +
                                     std::to_string(i));
            }
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
    std::vector<std::span<const double>> grads;
    grads.reserve(params.size());
    for (Tensor& p : params) grads.push_back(p.mutable_grad());
    adam_step(params, grads, state);
}

}  // namespace gridflow
