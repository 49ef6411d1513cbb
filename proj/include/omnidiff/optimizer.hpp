#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "omnidiff/backbone.hpp"
#include "omnidiff/tensor.hpp"

namespace omnidiff {

struct OptimizerConfig {
    double peak_lr = 2.0e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.1;
    double clip_norm = 1.0;
    std::size_t total_steps = 1;
};

// Cosine decay from peak at position 0 to zero at total_steps.
inline double cosine_lr(double peak, std::size_t position, std::size_t total_steps) {
    if (total_steps == 0) return peak;
    const double frac = std::min(1.0, static_cast<double>(position) / static_cast<double>(total_steps));
    return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

template <typename T>
struct AdamWState {
    NamedTensors<T> m, v;
    std::size_t step = 0;
};

template <typename T>
AdamWState<T> make_adamw_state(const ModelParams<T>& params) {
    AdamWState<T> st;
    for (const auto& [name, t] : params.tensors) {
        st.m.emplace(name, Tensor<T>{t.shape});
        st.v.emplace(name, Tensor<T>{t.shape});
    }
    return st;
}

// One AdamW update: global-norm clip first, then the adaptive step with
// decoupled weight decay (layer-norm gains and biases are not decayed).
// schedule_position indexes the cosine schedule over cfg.total_steps.
template <typename T>
void optimizer_step(ModelParams<T>& params, const NamedTensors<T>& grads, AdamWState<T>& state,
                    const OptimizerConfig& cfg, std::size_t schedule_position) {
    double sq_norm = 0.0;
    for (const auto& [name, g] : grads) {
        const Tensor<T>& p = params.at(name);
        if (!p.same_shape(g)) throw std::invalid_argument("gradient shape mismatch for " + name);
        for (const T& x : g.data) {
            const double v = static_cast<double>(x);
            if (!std::isfinite(v)) throw std::runtime_error("non-finite gradient in " + name);
            sq_norm += v * v;
        }
    }
    const double norm = std::sqrt(sq_norm);
    const double clip_scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
                                  ? cfg.clip_norm / norm
                                  : 1.0;
    const double lr = cosine_lr(cfg.peak_lr, schedule_position, cfg.total_steps);

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (auto& [name, p] : params.tensors) {
        const Tensor<T>& g = grads.at(name);
        Tensor<T>& m = state.m.at(name);
        Tensor<T>& v = state.v.at(name);
        const bool decay = cfg.weight_decay > 0.0 && !detail::is_gain(name) && !detail::is_bias(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gi = static_cast<double>(g.data[i]) * clip_scale;
            const double mi = cfg.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg.beta2) * gi * gi;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            double update = mhat / (std::sqrt(vhat) + cfg.eps);
            if (decay) update += cfg.weight_decay * static_cast<double>(p.data[i]);
            p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) - lr * update);
        }
    }
}

}  // namespace omnidiff
