#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "omnidiff/tensor.hpp"

namespace omnidiff {

enum class MergeStrategy { Shared, Stage1Only, ModalityDisentangled };

inline const char* to_string(MergeStrategy s) {
    switch (s) {
        case MergeStrategy::Shared: return "shared";
        case MergeStrategy::Stage1Only: return "stage1-only";
        case MergeStrategy::ModalityDisentangled: return "modality-disentangled";
    }
    return "?";
}

inline std::optional<MergeStrategy> merge_strategy_from_name(std::string_view name) {
    if (name == "shared") return MergeStrategy::Shared;
    if (name == "stage1-only") return MergeStrategy::Stage1Only;
    if (name == "modality-disentangled") return MergeStrategy::ModalityDisentangled;
    return std::nullopt;
}

struct MergeConfig {
    double alpha = 0.6;  // weight on the backbone theta0
    MergeStrategy strategy = MergeStrategy::ModalityDisentangled;
    std::size_t v0_total = 0;  // token count of the backbone vocabulary

    void validate() const {
        if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must lie in [0, 1]");
        if (v0_total == 0) throw std::invalid_argument("v0_total must be positive");
    }
};

// The vocabulary axis is declared per tensor name, never inferred from
// shape: inference breaks when dim == vocab size.
inline std::optional<std::size_t> vocab_axis(const std::string& name) {
    if (name == "embed") return 0;  // rows are token ids
    if (name == "head") return 1;   // columns are token ids
    return std::nullopt;
}

// alpha*a + (1-alpha)*b elementwise; endpoints are exact copies.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& a, const Tensor<T>& b, double alpha) {
    if (!a.same_shape(b)) throw std::invalid_argument("interpolate shape mismatch");
    if (alpha == 1.0) return a;
    if (alpha == 0.0) return b;
    Tensor<T> out{a.shape};
    for (std::size_t i = 0; i < a.numel(); ++i)
        out.data[i] = static_cast<T>(alpha * static_cast<double>(a.data[i]) +
                                     (1.0 - alpha) * static_cast<double>(b.data[i]));
    return out;
}

namespace detail {

// Merge one vocabulary-carrying tensor along `axis`. theta1 extends theta0
// by (v1 - v0) entries on that axis.
template <typename T>
Tensor<T> merge_vocab_tensor(const Tensor<T>& a, const Tensor<T>& b, std::size_t axis,
                             const MergeConfig& cfg) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("vocabulary tensors must be rank 2");
    const std::size_t other = axis == 0 ? 1 : 0;
    if (a.shape[other] != b.shape[other])
        throw std::invalid_argument("non-vocabulary dimension mismatch in vocab tensor");
    if (a.shape[axis] != cfg.v0_total || b.shape[axis] < cfg.v0_total)
        throw std::invalid_argument("vocabulary axis does not match v0_total");

    if (cfg.strategy == MergeStrategy::Stage1Only) return b;

    // Shared interpolates the V0 slice (exact at endpoints); modality
    // disentanglement keeps theta0 there bit for bit. The extension slice
    // [v0, v1) always comes from theta1.
    auto blend = [&cfg](T av, T bv) -> T {
        if (cfg.strategy == MergeStrategy::ModalityDisentangled || cfg.alpha == 1.0) return av;
        if (cfg.alpha == 0.0) return bv;
        return static_cast<T>(cfg.alpha * static_cast<double>(av) +
                              (1.0 - cfg.alpha) * static_cast<double>(bv));
    };
    Tensor<T> out = b;
    if (axis == 0) {
        for (std::size_t r = 0; r < cfg.v0_total; ++r)
            for (std::size_t c = 0; c < a.shape[1]; ++c) out(r, c) = blend(a(r, c), b(r, c));
    } else {
        for (std::size_t r = 0; r < a.shape[0]; ++r)
            for (std::size_t c = 0; c < cfg.v0_total; ++c) out(r, c) = blend(a(r, c), b(r, c));
    }
    return out;
}

}  // namespace detail

// Checkpoint interpolation under vocabulary extension. theta0 lives on the
// backbone vocabulary V0, theta1 on the extended V1; the result lives on V1.
template <typename T>
NamedTensors<T> merge(const NamedTensors<T>& theta0, const NamedTensors<T>& theta1,
                      const MergeConfig& cfg) {
    cfg.validate();
    for (const auto& [name, t] : theta0)
        if (!theta1.contains(name))
            throw std::invalid_argument("tensor " + name + " present only in theta0");
    NamedTensors<T> merged;
    for (const auto& [name, b] : theta1) {
        auto it = theta0.find(name);
        if (it == theta0.end())
            throw std::invalid_argument("tensor " + name + " present only in theta1");
        const Tensor<T>& a = it->second;
        if (auto axis = vocab_axis(name)) {
            merged.emplace(name, detail::merge_vocab_tensor(a, b, *axis, cfg));
        } else {
            if (!a.same_shape(b))
                throw std::invalid_argument("shape mismatch for non-vocabulary tensor " + name);
            merged.emplace(name, interpolate(a, b, cfg.alpha));
        }
    }
    return merged;
}

}  // namespace omnidiff
