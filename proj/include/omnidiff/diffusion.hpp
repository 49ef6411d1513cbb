#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "omnidiff/backbone.hpp"
#include "omnidiff/rng.hpp"
#include "omnidiff/templates.hpp"

namespace omnidiff {

// Lower bound on the masking ratio; keeps the 1/t importance weight bounded.
inline constexpr double kMinMaskRatio = 1e-3;

struct CorruptionDraw {
    double t = 1.0;
    std::vector<std::size_t> masked_positions;  // ascending
    std::vector<TokenId> corrupted;             // x_t
};

namespace detail {

inline std::vector<std::size_t> corruptible_positions(const AssembledSequence& seq) {
    std::vector<std::size_t> ps;
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq.corruptible[i]) ps.push_back(i);
    return ps;
}

inline std::vector<std::size_t> supervised_positions(const AssembledSequence& seq) {
    std::vector<std::size_t> ps;
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq.supervised[i]) ps.push_back(i);
    return ps;
}

}  // namespace detail

// Mask pattern from per-position uniforms thresholded at t. Sharing one
// uniform vector across two ratios t < t' yields nested mask sets, which is
// what makes the monotone-information property directly testable.
inline CorruptionDraw corrupt_with_uniforms(const VocabLayout& layout, const AssembledSequence& seq,
                                            double t, const std::vector<double>& uniforms) {
    const auto positions = detail::corruptible_positions(seq);
    if (positions.empty()) throw std::invalid_argument("sequence has no corruptible positions");
    if (uniforms.size() != positions.size())
        throw std::invalid_argument("one uniform draw required per corruptible position");
    CorruptionDraw draw;
    draw.t = t;
    draw.corrupted = seq.tokens;
    const TokenId mask = layout.mask_id();
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (uniforms[i] < t) {
            draw.masked_positions.push_back(positions[i]);
            draw.corrupted[positions[i]] = mask;
        }
    }
    return draw;
}

// Forward process: t ~ U(t_min, 1] unless overridden; each corruptible
// position masked independently with probability t. Empty draws are redrawn
// at the same t; after kMaxRedraws one supervised position is force-masked.
inline CorruptionDraw corrupt(Rng& rng, const VocabLayout& layout, const AssembledSequence& seq,
                              std::optional<double> t_override = std::nullopt) {
    const auto positions = detail::corruptible_positions(seq);
    if (positions.empty()) throw std::invalid_argument("sequence has no corruptible positions");
    const double t = t_override ? *t_override : (kMinMaskRatio + (1.0 - kMinMaskRatio) * rng.next_double());
    constexpr int kMaxRedraws = 16;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        std::vector<double> uniforms(positions.size());
        for (auto& u : uniforms) u = rng.next_double();
        CorruptionDraw draw = corrupt_with_uniforms(layout, seq, t, uniforms);
        if (!draw.masked_positions.empty()) return draw;
    }
    const auto supervised = detail::supervised_positions(seq);
    const auto& pool = supervised.empty() ? positions : supervised;
    const std::size_t pick = pool[rng.below(pool.size())];
    CorruptionDraw draw;
    draw.t = t;
    draw.corrupted = seq.tokens;
    draw.corrupted[pick] = layout.mask_id();
    draw.masked_positions.push_back(pick);
    return draw;
}

// Training wants every batch element to contribute: redraw until some
// masked position is also supervised.
inline CorruptionDraw corrupt_for_training(Rng& rng, const VocabLayout& layout,
                                           const AssembledSequence& seq) {
    constexpr int kMaxRedraws = 16;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        CorruptionDraw draw = corrupt(rng, layout, seq);
        for (std::size_t p : draw.masked_positions)
            if (seq.supervised[p]) return draw;
    }
    const auto supervised = detail::supervised_positions(seq);
    if (supervised.empty()) throw std::invalid_argument("sequence has no supervised positions");
    CorruptionDraw draw = corrupt(rng, layout, seq);
    const std::size_t pick = supervised[rng.below(supervised.size())];
    if (draw.corrupted[pick] != layout.mask_id()) {
        draw.corrupted[pick] = layout.mask_id();
        draw.masked_positions.insert(
            std::lower_bound(draw.masked_positions.begin(), draw.masked_positions.end(), pick),
            pick);
    }
    return draw;
}

// (1/t)-weighted cross entropy terms at masked AND supervised positions.
inline TrainingExample make_training_example(const AssembledSequence& seq,
                                             const CorruptionDraw& draw) {
    if (draw.corrupted.size() != seq.size())
        throw std::invalid_argument("draw does not match sequence");
    TrainingExample ex;
    ex.tokens = draw.corrupted;
    ex.weight = 1.0 / draw.t;
    for (std::size_t p : draw.masked_positions) {
        if (seq.supervised[p]) ex.terms.push_back({p, seq.tokens[p]});
    }
    if (ex.terms.empty())
        throw std::invalid_argument("no masked supervised position contributes to the loss");
    return ex;
}

// Same objective evaluated from precomputed logits (shared by loss() and
// the tests' closed-form oracles).
template <typename T>
double eq1_loss_from_logits(const Tensor<T>& logits, const AssembledSequence& seq,
                            const CorruptionDraw& draw) {
    TrainingExample ex = make_training_example(seq, draw);
    const std::size_t V = logits.cols();
    double total = 0.0;
    std::vector<double> prob(V);
    for (const LossTerm& term : ex.terms) {
        const T* row = logits.row_ptr(term.position);
        double mx = -1e300;
        for (std::size_t j = 0; j < V; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0.0;
        for (std::size_t j = 0; j < V; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
        const double logp = static_cast<double>(row[term.target]) - mx - std::log(sum);
        total += -logp;
    }
    return ex.weight * total;
}

template <typename T>
double loss(const ModelParams<T>& params, const AssembledSequence& seq,
            const CorruptionDraw& draw) {
    Tensor<T> logits = forward(params, draw.corrupted);
    return eq1_loss_from_logits(logits, seq, draw);
}

// Classifier-free-guidance conditioning dropout: with probability p_drop the
// caption/instruction text becomes MASK while delimiters and input-modality
// tokens stay visible.
inline AssembledSequence drop_condition(Rng& rng, const VocabLayout& layout,
                                        const AssembledSequence& seq, double p_drop) {
    if (!is_image_generation(seq.family))
        throw std::invalid_argument("conditioning dropout applies to image-generation families only");
    if (p_drop > 0.0 && rng.next_double() < p_drop) return unconditional_view(layout, seq);
    return seq;
}

}  // namespace omnidiff
