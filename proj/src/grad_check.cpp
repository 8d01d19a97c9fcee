#include "gridflow/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace gridflow {

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                           const std::vector<Tensor>& inputs, double tolerance, double step) {
    // Analytic pass. Clear any accumulation left by earlier checks first.
    for (const Tensor& in : inputs) {
        Tensor handle = in;
        handle.zero_grad();
    }
    Tensor loss = fn(inputs);
    if (loss.numel() != 1) throw ShapeError("grad_check: function must produce a scalar");
    loss.backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& in : inputs) {
        auto g = in.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) {
            analytic.back().assign(static_cast<size_t>(in.numel()), 0.0);
        }
    }

    // Numeric pass: central differences on detached copies.
    std::vector<Tensor> probe;
    probe.reserve(inputs.size());
    for (const Tensor& in : inputs) probe.push_back(in.detached());

    GradCheckReport report;
    for (size_t i = 0; i < probe.size(); ++i) {
        auto values = probe[i].mutable_data();
        for (size_t j = 0; j < values.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + step;
            const double f_plus = fn(probe).item();
            values[j] = saved - step;
            const double f_minus = fn(probe).item();
            values[j] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[i][j];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_err) report.max_rel_err = rel;
            if (rel > tolerance) {
                report.pass = false;
                if (report.failures.size() < 16) {
                    report.failures.push_back({static_cast<int>(i), static_cast<int64_t>(j), a,
                                               numeric, rel});
                }
            }
        }
    }
    return report;
}

}  // namespace gridflow
