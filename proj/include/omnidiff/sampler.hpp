#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "omnidiff/backbone.hpp"
#include "omnidiff/rng.hpp"
#include "omnidiff/templates.hpp"

namespace omnidiff {

enum class Schedule { Linear, Cosine };
enum class RemaskStrategy { LowConfidence, Random };

struct DecodeConfig {
    std::size_t steps = 16;
    std::size_t block_length = 8;
    Schedule schedule = Schedule::Linear;
    double temperature = 0.0;  // 0 = argmax
    double cfg_scale = 1.0;    // guidance strength; applied to image families only
    RemaskStrategy remask = RemaskStrategy::LowConfidence;
    std::uint64_t seed = 0;

    void validate() const {
        if (steps == 0) throw std::invalid_argument("steps must be >= 1");
        if (block_length == 0) throw std::invalid_argument("block_length must be >= 1");
        if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
        if (cfg_scale < 0.0) throw std::invalid_argument("cfg_scale must be >= 0");
    }
};

using DenoiseFn = std::function<Tensor<float>(const std::vector<TokenId>&)>;

// Split `total` across weights (block lengths) with an exact sum, largest
// remainder first, earlier blocks favored on ties.
inline std::vector<std::size_t> proportional_allocation(const std::vector<std::size_t>& lengths,
                                                        std::size_t total) {
    const std::size_t span = [&] {
        std::size_t s = 0;
        for (std::size_t l : lengths) s += l;
        return s;
    }();
    if (span == 0 || lengths.empty()) throw std::invalid_argument("empty allocation");
    std::vector<std::size_t> alloc(lengths.size());
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const double exact =
            static_cast<double>(total) * static_cast<double>(lengths[i]) / static_cast<double>(span);
        alloc[i] = static_cast<std::size_t>(exact);
        assigned += alloc[i];
        rema.push_back({exact - std::floor(exact), i});
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) alloc[rema[k % rema.size()].second] += 1;
    if (total >= lengths.size()) {
        // every part needs at least one unit; steal from the largest
        for (std::size_t i = 0; i < alloc.size(); ++i) {
            if (alloc[i] > 0) continue;
            std::size_t donor = alloc.size();
            for (std::size_t j = 0; j < alloc.size(); ++j)
                if (alloc[j] > 1 && (donor == alloc.size() || alloc[j] >= alloc[donor])) donor = j;
            if (donor == alloc.size()) throw std::logic_error("allocation fixup failed");
            alloc[donor] -= 1;
            alloc[i] += 1;
        }
    }
    return alloc;
}

// Number of tokens to finalize at each of s steps over a span of n masked
// tokens. Counts sum to n exactly; when s <= n every count is >= 1.
inline std::vector<std::size_t> schedule_counts(std::size_t n, std::size_t s, Schedule schedule) {
    if (s == 0 || n == 0) throw std::invalid_argument("schedule needs n >= 1 and s >= 1");
    std::vector<std::size_t> counts(s, 0);
    if (schedule == Schedule::Linear) {
        const std::size_t base = n / s;
        const std::size_t rem = n % s;
        for (std::size_t i = 0; i < s; ++i) counts[i] = base + (i >= s - rem ? 1 : 0);
    } else {
        // MaskGIT-style: remaining mask fraction follows cos(pi/2 * i/s);
        // cumulative rounding keeps the sum exact.
        std::size_t prev = 0;
        for (std::size_t i = 1; i <= s; ++i) {
            const double frac = std::cos(0.5 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(s));
            std::size_t cum = (i == s) ? n
                                       : static_cast<std::size_t>(
                                             std::llround(static_cast<double>(n) * (1.0 - frac)));
            cum = std::min(cum, n);
            cum = std::max(cum, prev);
            counts[i - 1] = cum - prev;
            prev = cum;
        }
    }
    if (s <= n) {
        // every step must finalize something: steal from the largest count
        for (std::size_t i = 0; i < s; ++i) {
            if (counts[i] > 0) continue;
            std::size_t donor = s;
            for (std::size_t j = 0; j < s; ++j)
                if (counts[j] > 1 && (donor == s || counts[j] >= counts[donor])) donor = j;
            if (donor == s) throw std::logic_error("schedule fixup failed");
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    return counts;
}

// l_uncond + s * (l_cond - l_uncond), elementwise.
inline Tensor<float> guided_logits(const Tensor<float>& cond, const Tensor<float>& uncond,
                                   double s) {
    if (!cond.same_shape(uncond)) throw std::invalid_argument("guided_logits shape mismatch");
    Tensor<float> out{cond.shape};
    for (std::size_t i = 0; i < cond.numel(); ++i) {
        const double c = static_cast<double>(cond.data[i]);
        const double u = static_cast<double>(uncond.data[i]);
        out.data[i] = static_cast<float>(u + s * (c - u));
    }
    return out;
}

struct StepTrace {
    std::size_t block = 0;
    std::size_t masked_before = 0;
    std::size_t masked_after = 0;
};

struct GenerateResult {
    std::vector<TokenId> tokens;
    std::size_t forward_calls = 0;
    std::vector<StepTrace> trace;
};

// One refinement step on [block_begin, block_end): predict every masked
// position in parallel, keep the k_finalize most confident commitments
// (ties broken toward the lower index), re-mask the rest.
inline std::size_t step(const DenoiseFn& denoise, const VocabLayout& layout,
                        std::vector<TokenId>& tokens, std::size_t block_begin,
                        std::size_t block_end, std::size_t k_finalize, const DecodeConfig& config,
                        Rng& rng) {
    const TokenId mask = layout.mask_id();
    std::vector<std::size_t> masked;
    for (std::size_t i = block_begin; i < block_end; ++i)
        if (tokens[i] == mask) masked.push_back(i);
    if (k_finalize > masked.size())
        throw std::invalid_argument("k_finalize exceeds masked count in block");
    if (masked.empty()) return 0;

    Tensor<float> logits = denoise(tokens);
    if (logits.rows() != tokens.size() || logits.cols() != layout.total_size())
        throw std::invalid_argument("denoiser returned logits of wrong shape");

    struct Candidate {
        double confidence;
        std::size_t position;
        TokenId token;
    };
    std::vector<Candidate> cands;
    cands.reserve(masked.size());
    const std::size_t V = layout.total_size();
    std::vector<double> prob(V);
    for (std::size_t pos : masked) {
        const float* row = logits.row_ptr(pos);
        double mx = -1e300;
        for (std::size_t j = 0; j < V; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0.0;
        for (std::size_t j = 0; j < V; ++j) {
            prob[j] = std::exp(static_cast<double>(row[j]) - mx);
            sum += prob[j];
        }
        for (std::size_t j = 0; j < V; ++j) prob[j] /= sum;

        // the absorbing MASK state is never a valid commitment
        TokenId chosen = 0;
        if (config.temperature == 0.0) {
            double best = -1.0;
            for (std::size_t j = 0; j < V; ++j)
                if (j != mask && prob[j] > best) {
                    best = prob[j];
                    chosen = static_cast<TokenId>(j);
                }
        } else {
            // sample from the temperature-scaled distribution
            double tsum = 0.0;
            std::vector<double> tprob(V);
            const double inv_t = 1.0 / config.temperature;
            for (std::size_t j = 0; j < V; ++j) {
                tprob[j] = j == mask ? 0.0 : std::exp((static_cast<double>(row[j]) - mx) * inv_t);
                tsum += tprob[j];
            }
            double u = rng.next_double() * tsum;
            std::size_t j = 0;
            for (; j + 1 < V; ++j) {
                if (j != mask && u < tprob[j]) break;
                u -= tprob[j];
            }
            if (j == mask) j = j + 1 < V ? j + 1 : j - 1;
            chosen = static_cast<TokenId>(j);
        }
        // confidence: model probability of the token actually selected
        cands.push_back({prob[chosen], pos, chosen});
    }

    if (config.remask == RemaskStrategy::LowConfidence) {
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            return a.position < b.position;
        });
    } else {
        // random keep-set, deterministic given the rng stream
        for (std::size_t i = cands.size(); i > 1; --i)
            std::swap(cands[i - 1], cands[rng.below(i)]);
    }
    for (std::size_t i = 0; i < k_finalize; ++i) tokens[cands[i].position] = cands[i].token;
    return k_finalize;
}

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> block_ranges(const AssembledSequence& seq,
                                                                     std::size_t block_length) {
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    if (is_image_generation(seq.family)) {
        // images decode as one block, fully parallel refinement
        blocks.push_back({seq.target_begin, seq.target_end});
        return blocks;
    }
    for (std::size_t b = seq.target_begin; b < seq.target_end; b += block_length)
        blocks.push_back({b, std::min(b + block_length, seq.target_end)});
    return blocks;
}

}  // namespace detail

// Reverse diffusion over the target span of `prompt` (which must be fully
// masked). Text and speech decode block-wise left to right; image spans are
// a single block. Guidance (cfg_scale != 1) applies to image families only
// and doubles the forward-call budget.
inline GenerateResult generate(const DenoiseFn& denoise, const VocabLayout& layout,
                               const AssembledSequence& prompt, const DecodeConfig& config) {
    config.validate();
    const TokenId mask = layout.mask_id();
    if (prompt.target_length() == 0) throw std::invalid_argument("prompt has an empty target span");
    for (std::size_t i = prompt.target_begin; i < prompt.target_end; ++i)
        if (prompt.tokens[i] != mask)
            throw std::invalid_argument("target span must be fully masked");
    if (prompt.target_length() == prompt.size())
        throw std::invalid_argument("prompt has no conditioning positions");

    GenerateResult result;
    result.tokens = prompt.tokens;
    Rng rng(config.seed);

    const bool guided = is_image_generation(prompt.family) && config.cfg_scale != 1.0;
    std::vector<TokenId> uncond_tokens;
    if (guided) uncond_tokens = unconditional_view(layout, prompt).tokens;

    DenoiseFn effective = [&](const std::vector<TokenId>& toks) -> Tensor<float> {
        result.forward_calls += 1;
        return denoise(toks);
    };
    DenoiseFn step_fn = effective;
    if (guided) {
        step_fn = [&](const std::vector<TokenId>& toks) -> Tensor<float> {
            for (std::size_t i = prompt.target_begin; i < prompt.target_end; ++i)
                uncond_tokens[i] = toks[i];
            Tensor<float> cond = effective(toks);
            Tensor<float> uncond = effective(uncond_tokens);
            return guided_logits(cond, uncond, config.cfg_scale);
        };
    }

    const auto blocks = detail::block_ranges(prompt, config.block_length);
    if (config.steps < blocks.size())
        throw std::invalid_argument("steps must cover at least one step per block");
    std::vector<std::size_t> lengths;
    for (const auto& [b, e] : blocks) lengths.push_back(e - b);
    std::vector<std::size_t> alloc = proportional_allocation(lengths, config.steps);

    std::size_t carry = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto [begin, end] = blocks[b];
        const std::size_t len = end - begin;
        std::size_t budget = alloc[b] + carry;
        // a block cannot use more steps than tokens; surplus is donated
        const std::size_t effective_steps = std::min(budget, len);
        carry = budget - effective_steps;
        const auto counts = schedule_counts(len, effective_steps, config.schedule);
        for (std::size_t s = 0; s < counts.size(); ++s) {
            std::size_t masked_before = 0;
            for (std::size_t i = begin; i < end; ++i)
                if (result.tokens[i] == mask) ++masked_before;
            step(step_fn, layout, result.tokens, begin, end, counts[s], config, rng);
            std::size_t masked_after = masked_before - counts[s];
            result.trace.push_back({b, masked_before, masked_after});
        }
    }
    return result;
}

template <typename T>
DenoiseFn make_denoiser(const ModelParams<T>& params) {
    return [&params](const std::vector<TokenId>& toks) -> Tensor<float> {
        Tensor<T> logits = forward(params, toks);
        if constexpr (std::is_same_v<T, float>) return logits;
        else return logits.template cast<float>();
    };
}

template <typename T>
GenerateResult generate(const ModelParams<T>& params, const AssembledSequence& prompt,
                        const DecodeConfig& config) {
    return generate(make_denoiser(params), params.config.vocab, prompt, config);
}

}  // namespace omnidiff
