// Adam with bias correction. Moments are kept in a list parallel to the
// model's tensor enumeration, so the update order is fixed.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "langid/tensor.hpp"

namespace langid {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;

    static AdamState init(const std::vector<Tensor*>& params) {
        AdamState s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const Tensor* p : params) {
            s.m.push_back(Tensor::zeros(p->shape));
            s.v.push_back(Tensor::zeros(p->shape));
        }
        return s;
    }
};

inline void adam_step(const AdamConfig& cfg, AdamState& state,
                      const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads) {
    Tensor::require(params.size() == grads.size() &&
                        params.size() == state.m.size(),
                    "adam_step: list sizes");
    state.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        Tensor::require(p.same_shape(g), "adam_step: grad shape");
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
            double m_hat = m.data[i] / bc1;
            double v_hat = v.data[i] / bc2;
            p.data[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace langid
