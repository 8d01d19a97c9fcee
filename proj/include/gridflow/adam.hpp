#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridflow/tensor.hpp"

namespace gridflow {

// Bias-corrected Adam. Moment buffers are kept per parameter, aligned with
// the parameter list they were created from.
struct AdamState {
    int64_t step_count = 0;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(std::span<const Tensor> params, double learning_rate);

// One update with explicit gradients (grads[i] matches params[i] in size).
void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads,
               AdamState& state);

// Convenience overload reading each parameter's accumulated .grad().
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace gridflow
