#pragma once

#include <functional>
#include <vector>

#include "gridflow/tensor.hpp"

namespace gridflow {

struct GradCheckFailure {
    int input_index = 0;
    int64_t flat_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = true;
    std::vector<GradCheckFailure> failures;
};

// Compares analytic gradients of a scalar-valued function against central
// finite differences, perturbation h (default 1e-5). Relative error uses a
// floor of 1e-3 in the denominator so near-zero gradients do not blow up
// the ratio. All inputs must have requires_grad set by the caller.
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                           const std::vector<Tensor>& inputs, double tolerance,
                           double step = 1e-5);

}  // namespace gridflow
