#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "omnidiff/synth.hpp"
#include "omnidiff/vocab.hpp"

namespace omnidiff {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// normalized edit distance, capped into [0, 1]
inline double character_error_rate(const std::string& hyp, const std::string& ref) {
    const std::size_t denom = std::max<std::size_t>(1, ref.size());
    return std::min(1.0, static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(denom));
}

// Decoding helpers tolerant to model errors: out-of-domain tokens map to a
// '#' placeholder (not in the toy alphabet, so it always scores as wrong).
inline std::string tolerant_text(const VocabLayout& layout, const std::vector<TokenId>& tokens) {
    std::string out;
    for (TokenId id : tokens) {
        if (id < toy_alphabet_size())
            out.push_back(kToyAlphabet[id]);
        else
            out.push_back('#');
        (void)layout;
    }
    return out;
}

inline std::string tolerant_speech_text(const VocabLayout& layout,
                                        const std::vector<TokenId>& tokens) {
    std::string out;
    TokenId prev = 0;
    bool have_prev = false;
    for (TokenId id : tokens) {
        if (have_prev && id == prev) continue;
        prev = id;
        have_prev = true;
        if (id >= layout.text_size + layout.vision_size && id < layout.total_size()) {
            const std::uint32_t unit =
                static_cast<std::uint32_t>(id - layout.text_size - layout.vision_size);
            out.push_back(unit < toy_alphabet_size() ? kToyAlphabet[unit] : '#');
        } else {
            out.push_back('#');
        }
    }
    return out;
}

}  // namespace omnidiff
