#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnidiff/rng.hpp"
#include "omnidiff/synth.hpp"
#include "omnidiff/templates.hpp"

namespace omnidiff {

// One training/eval example: raw parts only, everything token-level is
// derived deterministically at assembly time.
struct Record {
    TemplateFamily family = TemplateFamily::TextChat;
    std::string text;         // asr/tts source text
    std::string prompt;       // chat/think prompt
    std::string response;     // chat/think response
    bool think = false;       // thinking-mode variant
    Scene scene;              // image and video families
    Scene target_scene;       // i2i result scene
    std::string instruction;  // i2i edit instruction
    std::size_t frames = 0;   // v2t frame count
    bool loose = false;       // t2i: position-free caption conditioning
};

struct DataConfig {
    SceneConfig image_scene;                  // i2t / t2i / i2i
    SceneConfig video_scene{.side = 3, .min_objects = 1, .max_objects = 1};
    std::size_t video_frames = 4;
    std::size_t speech_min_len = 3;
    std::size_t speech_max_len = 6;
    std::size_t chat_max_start = 99;  // chain task: start in [0, chat_max_start]
    std::size_t chat_max_step = 9;    // increment in [1, chat_max_step]
    std::size_t chat_terms = 4;
    double t2i_loose_fraction = 0.0;  // share of t2i records with position-free captions
    std::size_t records_per_family = 2000;
    std::vector<TemplateFamily> families;
    std::uint64_t seed = 0;
};

using Dataset = std::map<TemplateFamily, std::vector<Record>>;

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace detail {

// lowercase letters only, no adjacent repeats (the run-collapse inverse of
// toy speech is exact on this domain)
inline std::string random_speech_text(Rng& rng, std::size_t min_len, std::size_t max_len) {
    const std::size_t len = min_len + static_cast<std::size_t>(rng.below(max_len - min_len + 1));
    std::string s;
    int prev = -1;
    for (std::size_t i = 0; i < len; ++i) {
        int c = static_cast<int>(rng.below(prev < 0 ? 26 : 25));
        if (prev >= 0 && c >= prev) ++c;  // skip the previous letter
        s.push_back(static_cast<char>('a' + c));
        prev = c;
    }
    return s;
}

// counting chain: "count from A by D" -> "A A+D A+2D ..."
inline std::pair<std::string, std::string> chain_example(Rng& rng, const DataConfig& cfg) {
    const std::size_t a = rng.below(cfg.chat_max_start + 1);
    const std::size_t d = 1 + rng.below(cfg.chat_max_step);
    std::string prompt = "count from " + std::to_string(a) + " by " + std::to_string(d);
    std::string response;
    for (std::size_t i = 0; i < cfg.chat_terms; ++i) {
        if (i) response += " ";
        response += std::to_string(a + i * d);
    }
    return {prompt, response};
}

}  // namespace detail

inline Record make_record(Rng& rng, TemplateFamily family, const DataConfig& cfg) {
    Record rec;
    rec.family = family;
    switch (family) {
        case TemplateFamily::SpeechToText:
        case TemplateFamily::TextToSpeech:
            rec.text = detail::random_speech_text(rng, cfg.speech_min_len, cfg.speech_max_len);
            break;
        case TemplateFamily::TextChat: {
            auto [p, r] = detail::chain_example(rng, cfg);
            rec.prompt = std::move(p);
            rec.response = std::move(r);
            break;
        }
        case TemplateFamily::ThinkingMode: {
            auto [p, r] = detail::chain_example(rng, cfg);
            rec.prompt = std::move(p);
            rec.think = rng.below(2) == 0;
            // think emits the whole chain, no_think only the final term
            rec.response = rec.think ? r : r.substr(r.rfind(' ') + 1);
            break;
        }
        case TemplateFamily::ImageToText:
            rec.scene = sample_scene(rng, cfg.image_scene);
            break;
        case TemplateFamily::TextToImage:
            rec.scene = sample_scene(rng, cfg.image_scene);
            rec.loose = rng.next_double() < cfg.t2i_loose_fraction;
            break;
        case TemplateFamily::ImageToImage: {
            rec.scene = sample_scene(rng, cfg.image_scene);
            EditPair pair = make_edit_pair(rng, rec.scene, cfg.image_scene);
            rec.instruction = pair.instruction;
            rec.target_scene = pair.target_scene;
            break;
        }
        case TemplateFamily::VideoToText:
            rec.scene = sample_scene(rng, cfg.video_scene);
            rec.frames = cfg.video_frames;
            break;
    }
    return rec;
}

inline Dataset generate_dataset(const DataConfig& cfg) {
    Dataset data;
    for (TemplateFamily family : cfg.families) {
        Rng rng(derive_seed(cfg.seed, family_name(family)));
        auto& records = data[family];
        records.reserve(cfg.records_per_family);
        for (std::size_t i = 0; i < cfg.records_per_family; ++i)
            records.push_back(make_record(rng, family, cfg));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Record -> token sequence
// ---------------------------------------------------------------------------

struct TaskCapacities {
    std::size_t chat_response = 32;   // chat / think response span
    std::size_t caption = 48;         // i2t response span
    std::size_t video_caption = 48;   // v2t response span
    std::size_t asr_text = 10;        // asr response span
    std::size_t speech_span = 18;     // tts target span
    std::size_t speech_rate = 2;
};

inline constexpr const char* kDescribePrompt = "describe";

inline AssembledSequence assemble_record(const VocabLayout& layout, const Record& rec, int stage,
                                         const TaskCapacities& caps, const SceneConfig& image_cfg,
                                         const SceneConfig& video_cfg,
                                         EosSupervision eos_mode = EosSupervision::ByStage) {
    TemplateParts parts;
    std::size_t capacity = 0;
    switch (rec.family) {
        case TemplateFamily::SpeechToText:
            parts.input_tokens = tokenize_speech(layout, rec.text, caps.speech_rate);
            parts.response = tokenize_text(layout, rec.text);
            capacity = caps.asr_text;
            break;
        case TemplateFamily::TextToSpeech:
            parts.prompt = tokenize_text(layout, rec.text);
            parts.target_tokens = tokenize_speech(layout, rec.text, caps.speech_rate);
            capacity = caps.speech_span;
            break;
        case TemplateFamily::TextChat:
        case TemplateFamily::ThinkingMode:
            parts.prompt = tokenize_text(layout, rec.prompt);
            parts.response = tokenize_text(layout, rec.response);
            parts.think = rec.think;
            capacity = caps.chat_response;
            break;
        case TemplateFamily::ImageToText:
            parts.input_tokens = tokenize_image(layout, render(rec.scene, image_cfg));
            parts.prompt = tokenize_text(layout, kDescribePrompt);
            parts.response = tokenize_text(layout, caption(rec.scene));
            capacity = caps.caption;
            break;
        case TemplateFamily::TextToImage: {
            parts.prompt =
                tokenize_text(layout, rec.loose ? attribute_caption(rec.scene) : caption(rec.scene));
            parts.target_tokens = tokenize_image(layout, render(rec.scene, image_cfg));
            capacity = parts.target_tokens.size();
            break;
        }
        case TemplateFamily::ImageToImage: {
            parts.input_tokens = tokenize_image(layout, render(rec.scene, image_cfg));
            parts.prompt = tokenize_text(layout, rec.instruction);
            parts.target_tokens = tokenize_image(layout, render(rec.target_scene, image_cfg));
            capacity = parts.target_tokens.size();
            break;
        }
        case TemplateFamily::VideoToText: {
            VideoClip clip = animate(rec.scene, video_cfg, rec.frames);
            parts.input_tokens = tokenize_video(layout, clip);
            parts.frames = rec.frames;
            parts.prompt = tokenize_text(layout, kDescribePrompt);
            parts.response = tokenize_text(layout, video_caption(rec.scene));
            capacity = caps.video_caption;
            break;
        }
    }
    return assemble(layout, rec.family, parts, stage, capacity, eos_mode);
}

// Ground-truth string/grid the decoder is scored against.
inline std::string reference_text(const Record& rec) {
    switch (rec.family) {
        case TemplateFamily::SpeechToText: return rec.text;
        case TemplateFamily::TextToSpeech: return rec.text;
        case TemplateFamily::TextChat:
        case TemplateFamily::ThinkingMode: return rec.response;
        case TemplateFamily::ImageToText: return caption(rec.scene);
        case TemplateFamily::VideoToText: return video_caption(rec.scene);
        default: return {};
    }
}

// ---------------------------------------------------------------------------
// JSON serialization: one record per line, UTF-8
// ---------------------------------------------------------------------------

inline nlohmann::json scene_to_json(const Scene& s) {
    nlohmann::json objs = nlohmann::json::array();
    for (const SceneObject& o : s.objects) objs.push_back({o.shape, o.color, o.row, o.col});
    return {{"side", s.side}, {"objects", objs}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene s;
    s.side = j.at("side").get<std::size_t>();
    for (const auto& o : j.at("objects")) {
        SceneObject obj;
        obj.shape = o.at(0).get<std::uint32_t>();
        obj.color = o.at(1).get<std::uint32_t>();
        obj.row = o.at(2).get<std::size_t>();
        obj.col = o.at(3).get<std::size_t>();
        s.objects.push_back(obj);
    }
    return s;
}

inline nlohmann::json record_to_json(const Record& rec) {
    nlohmann::json j;
    j["family"] = family_name(rec.family);
    switch (rec.family) {
        case TemplateFamily::SpeechToText:
        case TemplateFamily::TextToSpeech:
            j["text"] = rec.text;
            break;
        case TemplateFamily::TextChat:
            j["prompt"] = rec.prompt;
            j["response"] = rec.response;
            break;
        case TemplateFamily::ThinkingMode:
            j["prompt"] = rec.prompt;
            j["response"] = rec.response;
            j["think"] = rec.think;
            break;
        case TemplateFamily::ImageToText:
            j["scene"] = scene_to_json(rec.scene);
            break;
        case TemplateFamily::TextToImage:
            j["scene"] = scene_to_json(rec.scene);
            if (rec.loose) j["loose"] = true;
            break;
        case TemplateFamily::ImageToImage:
            j["scene"] = scene_to_json(rec.scene);
            j["instruction"] = rec.instruction;
            j["target"] = scene_to_json(rec.target_scene);
            break;
        case TemplateFamily::VideoToText:
            j["scene"] = scene_to_json(rec.scene);
            j["frames"] = rec.frames;
            break;
    }
    return j;
}

inline Record record_from_json(const nlohmann::json& j) {
    Record rec;
    auto family = family_from_name(j.at("family").get<std::string>());
    if (!family) throw std::invalid_argument("unknown record family");
    rec.family = *family;
    if (j.contains("text")) rec.text = j.at("text").get<std::string>();
    if (j.contains("prompt")) rec.prompt = j.at("prompt").get<std::string>();
    if (j.contains("response")) rec.response = j.at("response").get<std::string>();
    if (j.contains("think")) rec.think = j.at("think").get<bool>();
    if (j.contains("scene")) rec.scene = scene_from_json(j.at("scene"));
    if (j.contains("target")) rec.target_scene = scene_from_json(j.at("target"));
    if (j.contains("instruction")) rec.instruction = j.at("instruction").get<std::string>();
    if (j.contains("frames")) rec.frames = j.at("frames").get<std::size_t>();
    if (j.contains("loose")) rec.loose = j.at("loose").get<bool>();
    return rec;
}

inline void write_jsonl(const std::vector<Record>& records, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (const Record& rec : records) f << record_to_json(rec).dump() << "\n";
}

inline std::vector<Record> read_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<Record> records;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

// --- config JSON -------------------------------------------------------------

inline nlohmann::json scene_config_to_json(const SceneConfig& c) {
    return {{"side", c.side},
            {"min_objects", c.min_objects},
            {"max_objects", c.max_objects},
            {"n_shapes", c.n_shapes},
            {"n_colors", c.n_colors}};
}

inline SceneConfig scene_config_from_json(const nlohmann::json& j) {
    SceneConfig c;
    c.side = j.at("side").get<std::size_t>();
    c.min_objects = j.at("min_objects").get<std::size_t>();
    c.max_objects = j.at("max_objects").get<std::size_t>();
    c.n_shapes = j.at("n_shapes").get<std::uint32_t>();
    c.n_colors = j.at("n_colors").get<std::uint32_t>();
    return c;
}

inline nlohmann::json data_config_to_json(const DataConfig& c) {
    nlohmann::json fams = nlohmann::json::array();
    for (TemplateFamily f : c.families) fams.push_back(family_name(f));
    return {{"image_scene", scene_config_to_json(c.image_scene)},
            {"video_scene", scene_config_to_json(c.video_scene)},
            {"video_frames", c.video_frames},
            {"speech_min_len", c.speech_min_len},
            {"speech_max_len", c.speech_max_len},
            {"chat_max_start", c.chat_max_start},
            {"chat_max_step", c.chat_max_step},
            {"chat_terms", c.chat_terms},
            {"t2i_loose_fraction", c.t2i_loose_fraction},
            {"records_per_family", c.records_per_family},
            {"families", fams},
            {"seed", c.seed}};
}

inline DataConfig data_config_from_json(const nlohmann::json& j) {
    DataConfig c;
    c.image_scene = scene_config_from_json(j.at("image_scene"));
    c.video_scene = scene_config_from_json(j.at("video_scene"));
    c.video_frames = j.at("video_frames").get<std::size_t>();
    c.speech_min_len = j.at("speech_min_len").get<std::size_t>();
    c.speech_max_len = j.at("speech_max_len").get<std::size_t>();
    c.chat_max_start = j.at("chat_max_start").get<std::size_t>();
    c.chat_max_step = j.at("chat_max_step").get<std::size_t>();
    c.chat_terms = j.at("chat_terms").get<std::size_t>();
    if (j.contains("t2i_loose_fraction"))
        c.t2i_loose_fraction = j.at("t2i_loose_fraction").get<double>();
    c.records_per_family = j.at("records_per_family").get<std::size_t>();
    for (const auto& f : j.at("families")) {
        auto fam = family_from_name(f.get<std::string>());
        if (!fam) throw std::invalid_argument("unknown family in data config: " + f.get<std::string>());
        c.families.push_back(*fam);
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace omnidiff
