#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnidiff/backbone.hpp"
#include "omnidiff/tensor.hpp"
#include "omnidiff/vocab.hpp"

namespace omnidiff {

struct CheckpointError : std::runtime_error {
    enum class Kind { Io, BadMagic, Version, Truncated, Inconsistent };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct CheckpointMeta {
    int stage = 0;
    std::size_t step = 0;
    std::uint64_t seed = 0;
    std::string phase;  // free-form: "backbone", "stage1", "merged", ...

    bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
    VocabLayout layout;
    ModelConfig model;
    CheckpointMeta meta;
    NamedTensors<float> tensors;
};

inline constexpr char kCheckpointMagic[4] = {'O', 'M', 'D', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// --- canonical JSON header ---------------------------------------------------

inline nlohmann::json layout_to_json(const VocabLayout& layout) {
    nlohmann::json specials = nlohmann::json::object();
    for (const auto& [name, id] : layout.specials) specials[name] = id;
    return {{"text_size", layout.text_size},
            {"vision_size", layout.vision_size},
            {"speech_size", layout.speech_size},
            {"specials", specials}};
}

inline VocabLayout layout_from_json(const nlohmann::json& j) {
    VocabLayout layout;
    layout.text_size = j.at("text_size").get<std::size_t>();
    layout.vision_size = j.at("vision_size").get<std::size_t>();
    layout.speech_size = j.at("speech_size").get<std::size_t>();
    for (const auto& [name, id] : j.at("specials").items())
        layout.specials[name] = id.get<TokenId>();
    return layout;
}

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {{"dim", cfg.dim},       {"layers", cfg.layers},   {"heads", cfg.heads},
            {"max_len", cfg.max_len}, {"seed", cfg.seed},     {"vocab", layout_to_json(cfg.vocab)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.dim = j.at("dim").get<std::size_t>();
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.max_len = j.at("max_len").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.vocab = layout_from_json(j.at("vocab"));
    return cfg;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);

    nlohmann::json header = {{"vocab", layout_to_json(ckpt.layout)},
                             {"model", model_config_to_json(ckpt.model)},
                             {"metadata",
                              {{"stage", ckpt.meta.stage},
                               {"step", ckpt.meta.step},
                               {"seed", ckpt.meta.seed},
                               {"phase", ckpt.meta.phase}}}};
    const std::string header_text = header.dump();  // sorted keys, no whitespace
    detail::put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;

    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape) detail::put_u64(out, d);
        for (float v : t.data) detail::put_f32(out, v);
    }
    return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& buf) {
    detail::Reader r{buf};
    const std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0)
        throw CheckpointError(CheckpointError::Kind::BadMagic, "bad magic: not a checkpoint file");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError(CheckpointError::Kind::Version,
                              "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t header_len = r.u32();
    const std::string header_text = r.bytes(header_len);
    nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
    if (header.is_discarded())
        throw CheckpointError(CheckpointError::Kind::Inconsistent, "malformed checkpoint header");

    Checkpoint ckpt;
    try {
        ckpt.layout = layout_from_json(header.at("vocab"));
        ckpt.model = model_config_from_json(header.at("model"));
        const auto& meta = header.at("metadata");
        ckpt.meta.stage = meta.at("stage").get<int>();
        ckpt.meta.step = meta.at("step").get<std::size_t>();
        ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
        ckpt.meta.phase = meta.at("phase").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::Inconsistent,
                              std::string("checkpoint header missing fields: ") + e.what());
    }

    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.u64());
            numel *= d;
        }
        Tensor<float> t;
        t.shape = std::move(shape);
        t.data.resize(numel);
        for (auto& v : t.data) v = r.f32();
        if (!ckpt.tensors.emplace(name, std::move(t)).second)
            throw CheckpointError(CheckpointError::Kind::Inconsistent,
                                  "duplicate tensor name " + name);
    }

    // shape/layout consistency against the declared model config
    if (ckpt.model.vocab != ckpt.layout)
        throw CheckpointError(CheckpointError::Kind::Inconsistent,
                              "model config vocabulary disagrees with checkpoint layout");
    for (const auto& [name, shape] : tensor_registry(ckpt.model)) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw CheckpointError(CheckpointError::Kind::Inconsistent, "missing tensor " + name);
        if (it->second.shape != shape)
            throw CheckpointError(CheckpointError::Kind::Inconsistent,
                                  "tensor " + name + " has inconsistent shape");
    }
    if (ckpt.tensors.size() != tensor_registry(ckpt.model).size())
        throw CheckpointError(CheckpointError::Kind::Inconsistent,
                              "checkpoint carries unexpected extra tensors");
    return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path + " for writing");
    const std::string bytes = serialize_checkpoint(ckpt);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError(CheckpointError::Kind::Io, "short write to " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(buf);
}

inline Checkpoint checkpoint_from_params(const ModelParams<float>& params, CheckpointMeta meta) {
    Checkpoint ckpt;
    ckpt.layout = params.config.vocab;
    ckpt.model = params.config;
    ckpt.meta = std::move(meta);
    ckpt.tensors = params.tensors;
    return ckpt;
}

inline ModelParams<float> params_from_checkpoint(const Checkpoint& ckpt) {
    ModelParams<float> params;
    params.config = ckpt.model;
    params.tensors = ckpt.tensors;
    return params;
}

}  // namespace omnidiff
