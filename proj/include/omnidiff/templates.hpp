#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnidiff/synth.hpp"
#include "omnidiff/vocab.hpp"

namespace omnidiff {

enum class TemplateFamily {
    VideoToText,
    SpeechToText,
    TextToSpeech,
    TextChat,
    ImageToText,
    TextToImage,
    ImageToImage,
    ThinkingMode,
};

inline const char* family_name(TemplateFamily f) {
    switch (f) {
        case TemplateFamily::VideoToText: return "v2t";
        case TemplateFamily::SpeechToText: return "asr";
        case TemplateFamily::TextToSpeech: return "tts";
        case TemplateFamily::TextChat: return "chat";
        case TemplateFamily::ImageToText: return "i2t";
        case TemplateFamily::TextToImage: return "t2i";
        case TemplateFamily::ImageToImage: return "i2i";
        case TemplateFamily::ThinkingMode: return "think";
    }
    return "?";
}

inline std::optional<TemplateFamily> family_from_name(std::string_view name) {
    for (TemplateFamily f :
         {TemplateFamily::VideoToText, TemplateFamily::SpeechToText, TemplateFamily::TextToSpeech,
          TemplateFamily::TextChat, TemplateFamily::ImageToText, TemplateFamily::TextToImage,
          TemplateFamily::ImageToImage, TemplateFamily::ThinkingMode}) {
        if (name == family_name(f)) return f;
    }
    return std::nullopt;
}

inline std::vector<TemplateFamily> all_families() {
    return {TemplateFamily::VideoToText, TemplateFamily::SpeechToText, TemplateFamily::TextToSpeech,
            TemplateFamily::TextChat,    TemplateFamily::ImageToText,  TemplateFamily::TextToImage,
            TemplateFamily::ImageToImage, TemplateFamily::ThinkingMode};
}

inline bool is_image_generation(TemplateFamily f) {
    return f == TemplateFamily::TextToImage || f == TemplateFamily::ImageToImage;
}

// Stage availability mirrors the curriculum: stage 1 trains only the
// text-anchoring tasks for new modalities, stage 2 opens every family
// except thinking-mode, stage 3 opens all.
inline bool family_available(TemplateFamily f, int stage) {
    switch (f) {
        case TemplateFamily::VideoToText:
        case TemplateFamily::SpeechToText:
        case TemplateFamily::TextToSpeech:
            return stage >= 1;
        case TemplateFamily::ThinkingMode:
            return stage >= 3;
        default:
            return stage >= 2;
    }
}

// Raw parts for one training example; which fields matter depends on the
// family (assemble validates).
struct TemplateParts {
    std::vector<TokenId> prompt;         // text ids: chat prompt / instruction / caption
    std::vector<TokenId> response;       // text ids for text-target families
    std::vector<TokenId> input_tokens;   // modality input: speech units / image / video tokens
    std::vector<TokenId> target_tokens;  // modality target: speech units or image tokens
    std::size_t frames = 0;              // video frame count (input_tokens split evenly)
    bool think = false;                  // thinking-mode control variant
};

struct AssembledSequence {
    std::vector<TokenId> tokens;       // x0
    std::vector<std::uint8_t> supervised;
    std::vector<std::uint8_t> corruptible;
    TemplateFamily family = TemplateFamily::TextChat;
    std::size_t target_begin = 0;
    std::size_t target_end = 0;  // one past the last target position

    std::size_t size() const { return tokens.size(); }
    std::size_t target_length() const { return target_end - target_begin; }
};

enum class EosSupervision { ByStage, ForceOff };

namespace detail {

struct SequenceBuilder {
    AssembledSequence seq;

    void push_conditioning(TokenId id) {
        seq.tokens.push_back(id);
        seq.supervised.push_back(0);
        seq.corruptible.push_back(0);
    }
    void push_conditioning(const std::vector<TokenId>& ids) {
        for (TokenId id : ids) push_conditioning(id);
    }
    // Target region: corruptible everywhere; supervision of the EOS padding
    // depends on the stage (scheduled padding learning).
    void push_target(const std::vector<TokenId>& payload, std::size_t capacity, TokenId eos,
                     bool pad_with_eos, bool supervise_eos) {
        if (payload.size() > capacity)
            throw std::invalid_argument("target of length " + std::to_string(payload.size()) +
                                        " exceeds capacity " + std::to_string(capacity));
        if (!pad_with_eos && payload.size() != capacity)
            throw std::invalid_argument("image targets must fill their span exactly");
        seq.target_begin = seq.tokens.size();
        for (TokenId id : payload) {
            seq.tokens.push_back(id);
            seq.supervised.push_back(1);
            seq.corruptible.push_back(1);
        }
        for (std::size_t i = payload.size(); i < capacity; ++i) {
            seq.tokens.push_back(eos);
            seq.supervised.push_back(supervise_eos ? 1 : 0);
            seq.corruptible.push_back(1);
        }
        seq.target_end = seq.tokens.size();
    }
};

}  // namespace detail

inline AssembledSequence assemble(const VocabLayout& layout, TemplateFamily family,
                                  const TemplateParts& parts, int stage,
                                  std::size_t target_capacity,
                                  EosSupervision eos_mode = EosSupervision::ByStage) {
    if (!family_available(family, stage))
        throw std::invalid_argument(std::string(family_name(family)) +
                                    " is not available at stage " + std::to_string(stage));
    const bool supervise_eos = (eos_mode == EosSupervision::ByStage) ? stage >= 2 : false;
    const TokenId eos = layout.eos_id();
    detail::SequenceBuilder b;
    b.seq.family = family;

    switch (family) {
        case TemplateFamily::VideoToText: {
            if (parts.frames == 0 || parts.input_tokens.size() % parts.frames != 0)
                throw std::invalid_argument("video tokens do not divide into frames");
            const std::size_t per_frame = parts.input_tokens.size() / parts.frames;
            for (std::size_t f = 0; f < parts.frames; ++f) {
                b.push_conditioning(layout.special(special::kImage));
                for (std::size_t i = 0; i < per_frame; ++i)
                    b.push_conditioning(parts.input_tokens[f * per_frame + i]);
            }
            b.push_conditioning(layout.special(special::kUser));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(layout.special(special::kAssistant));
            b.push_target(parts.response, target_capacity, eos, true, supervise_eos);
            break;
        }
        case TemplateFamily::SpeechToText: {
            b.push_conditioning(layout.special(special::kStartOfSpeech));
            b.push_conditioning(parts.input_tokens);
            b.push_conditioning(layout.special(special::kEndOfSpeech));
            b.push_conditioning(layout.special(special::kStartOfText));
            b.push_target(parts.response, target_capacity, eos, true, supervise_eos);
            break;
        }
        case TemplateFamily::TextToSpeech: {
            b.push_conditioning(layout.special(special::kStartOfText));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(layout.special(special::kEndOfText));
            b.push_conditioning(layout.special(special::kStartOfSpeech));
            b.push_target(parts.target_tokens, target_capacity, eos, true, supervise_eos);
            b.push_conditioning(layout.special(special::kEndOfSpeech));
            break;
        }
        case TemplateFamily::TextChat: {
            b.push_conditioning(layout.special(special::kUser));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(layout.special(special::kAssistant));
            b.push_target(parts.response, target_capacity, eos, true, supervise_eos);
            break;
        }
        case TemplateFamily::ImageToText: {
            b.push_conditioning(layout.special(special::kImage));
            b.push_conditioning(parts.input_tokens);
            b.push_conditioning(layout.special(special::kUser));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(layout.special(special::kAssistant));
            b.push_target(parts.response, target_capacity, eos, true, supervise_eos);
            break;
        }
        case TemplateFamily::TextToImage: {
            b.push_conditioning(layout.special(special::kStartOfText));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(layout.special(special::kEndOfText));
            b.push_target(parts.target_tokens, target_capacity, eos, false, false);
            break;
        }
        case TemplateFamily::ImageToImage: {
            b.push_conditioning(layout.special(special::kImage));
            b.push_conditioning(parts.input_tokens);
            b.push_conditioning(layout.special(special::kStartOfText));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(layout.special(special::kEndOfText));
            b.push_target(parts.target_tokens, target_capacity, eos, false, false);
            break;
        }
        case TemplateFamily::ThinkingMode: {
            b.push_conditioning(layout.special(special::kUser));
            b.push_conditioning(parts.prompt);
            b.push_conditioning(
                layout.special(parts.think ? special::kThink : special::kNoThink));
            b.push_conditioning(layout.special(special::kAssistant));
            b.push_target(parts.response, target_capacity, eos, true, supervise_eos);
            break;
        }
    }
    return b.seq;
}

inline std::vector<TokenId> truncate_at_eos(const VocabLayout& layout,
                                            const std::vector<TokenId>& tokens) {
    const TokenId eos = layout.eos_id();
    std::vector<TokenId> out;
    for (TokenId id : tokens) {
        if (id == eos) break;
        out.push_back(id);
    }
    return out;
}

// Inference-time view: target span fully masked, conditioning untouched.
inline AssembledSequence make_generation_prompt(const VocabLayout& layout,
                                                const AssembledSequence& seq) {
    AssembledSequence out = seq;
    const TokenId mask = layout.mask_id();
    for (std::size_t i = out.target_begin; i < out.target_end; ++i) out.tokens[i] = mask;
    return out;
}

// Unconditional view for guidance: conditioning text (non-special text-range
// tokens outside the target span) replaced by MASK; delimiters and
// modality tokens retained.
inline AssembledSequence unconditional_view(const VocabLayout& layout,
                                            const AssembledSequence& seq) {
    AssembledSequence out = seq;
    const TokenId mask = layout.mask_id();
    for (std::size_t i = 0; i < out.tokens.size(); ++i) {
        if (out.corruptible[i]) continue;
        TokenId id = out.tokens[i];
        if (modality_of(layout, id) == Modality::Text && !layout.is_special(id))
            out.tokens[i] = mask;
    }
    return out;
}

}  // namespace omnidiff
