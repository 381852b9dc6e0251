// Central finite-difference verification of analytic gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "langid/tensor.hpp"

namespace langid {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// `loss` must recompute the objective from the current parameter values.
// Parameters are perturbed in place and restored.
inline GradCheckReport grad_check(
    const std::function<double()>& loss,
    const std::vector<std::pair<std::string, Tensor*>>& params,
    const std::vector<const Tensor*>& analytic_grads, double h = 1e-5) {
    Tensor::require(params.size() == analytic_grads.size(), "grad_check: list sizes");
    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k].second;
        const Tensor& g = *analytic_grads[k];
        Tensor::require(p.same_shape(g), "grad_check: grad shape for " + params[k].first);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            double saved = p.data[i];
            p.data[i] = saved + h;
            double up = loss();
            p.data[i] = saved - h;
            double down = loss();
            p.data[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            double analytic = g.data[i];
            double rel = std::fabs(analytic - numeric) /
                         std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_tensor = params[k].first;
                report.worst_index = i;
                report.analytic_at_worst = analytic;
                report.numeric_at_worst = numeric;
            }
        }
    }
    return report;
}

}  // namespace langid
