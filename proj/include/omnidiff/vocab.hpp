#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnidiff/tensor.hpp"

namespace omnidiff {

enum class Modality { Text, Vision, Speech };

inline const char* to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Vision: return "vision";
        case Modality::Speech: return "speech";
    }
    return "?";
}

namespace special {
inline constexpr const char* kMask = "MASK";
inline constexpr const char* kEos = "EOS";
inline constexpr const char* kUser = "<|user|>";
inline constexpr const char* kAssistant = "<|assistant|>";
inline constexpr const char* kImage = "<image>";
inline constexpr const char* kStartOfText = "<|startoftext|>";
inline constexpr const char* kEndOfText = "<|endoftext|>";
inline constexpr const char* kStartOfSpeech = "<|startofspeech|>";
inline constexpr const char* kEndOfSpeech = "<|endofspeech|>";
inline constexpr const char* kThink = "think";
inline constexpr const char* kNoThink = "no_think";
}  // namespace special

inline std::vector<std::string> standard_special_names() {
    return {special::kMask,          special::kEos,         special::kUser,
            special::kAssistant,    special::kImage,       special::kStartOfText,
            special::kEndOfText,    special::kStartOfSpeech, special::kEndOfSpeech,
            special::kThink,        special::kNoThink};
}

// Partition of the unified token space: [0, text) text ids (special tokens
// at the top of that range), [text, text+vision) vision codebook ids,
// [text+vision, total) speech unit ids. Immutable after construction.
struct VocabLayout {
    std::size_t text_size = 0;
    std::size_t vision_size = 0;
    std::size_t speech_size = 0;
    std::map<std::string, TokenId> specials;

    std::size_t total_size() const { return text_size + vision_size + speech_size; }

    TokenId special(const std::string& name) const {
        auto it = specials.find(name);
        if (it == specials.end()) throw std::invalid_argument("unknown special token: " + name);
        return it->second;
    }
    TokenId mask_id() const { return special(special::kMask); }
    TokenId eos_id() const { return special(special::kEos); }

    bool is_special(TokenId id) const {
        for (const auto& [name, sid] : specials)
            if (sid == id) return true;
        return false;
    }

    bool operator==(const VocabLayout&) const = default;
};

inline VocabLayout build_layout(std::size_t text_size, std::size_t vision_size,
                                std::size_t speech_size,
                                const std::vector<std::string>& special_names) {
    if (text_size == 0) throw std::invalid_argument("text_size must be positive");
    if (special_names.size() > text_size)
        throw std::invalid_argument("text range too small for special tokens");
    VocabLayout layout;
    layout.text_size = text_size;
    layout.vision_size = vision_size;
    layout.speech_size = speech_size;
    // Special ids sit at the top of the text range, ascending in
    // declaration order, so layouts are deterministic.
    TokenId next = static_cast<TokenId>(text_size - special_names.size());
    for (const auto& name : special_names) {
        if (!layout.specials.emplace(name, next).second)
            throw std::invalid_argument("duplicate special token name: " + name);
        ++next;
    }
    return layout;
}

inline Modality modality_of(const VocabLayout& layout, TokenId id) {
    if (id < layout.text_size) return Modality::Text;
    if (id < layout.text_size + layout.vision_size) return Modality::Vision;
    if (id < layout.total_size()) return Modality::Speech;
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(layout.total_size()));
}

inline VocabLayout extend_with_speech(const VocabLayout& base, std::size_t speech_size) {
    if (base.speech_size != 0)
        throw std::invalid_argument("layout already has a speech range");
    VocabLayout out = base;
    out.speech_size = speech_size;
    return out;
}

inline TokenId vision_token(const VocabLayout& layout, std::uint32_t code) {
    return static_cast<TokenId>(layout.text_size + code);
}
inline TokenId speech_token(const VocabLayout& layout, std::uint32_t unit) {
    return static_cast<TokenId>(layout.text_size + layout.vision_size + unit);
}

}  // namespace omnidiff
