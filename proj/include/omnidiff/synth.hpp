#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omnidiff/rng.hpp"
#include "omnidiff/vocab.hpp"

namespace omnidiff {

// ---------------------------------------------------------------------------
// Toy text: fixed character-level alphabet. Character index == text token id.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kToyAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789 ,.";

inline std::size_t toy_alphabet_size() { return kToyAlphabet.size(); }

inline std::uint32_t char_index(char c) {
    auto pos = kToyAlphabet.find(c);
    if (pos == std::string_view::npos)
        throw std::invalid_argument(std::string("character outside toy alphabet: '") + c + "'");
    return static_cast<std::uint32_t>(pos);
}

inline std::vector<TokenId> tokenize_text(const VocabLayout& layout, std::string_view text) {
    if (toy_alphabet_size() + layout.specials.size() > layout.text_size)
        throw std::invalid_argument("text range too small for toy alphabet plus specials");
    std::vector<TokenId> out;
    out.reserve(text.size());
    for (char c : text) out.push_back(static_cast<TokenId>(char_index(c)));
    return out;
}

inline std::string detokenize_text(const VocabLayout& layout, const std::vector<TokenId>& tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (TokenId id : tokens) {
        if (id >= toy_alphabet_size())
            throw std::invalid_argument("token id " + std::to_string(id) +
                                        " is not a toy-alphabet character");
        (void)layout;
        out.push_back(kToyAlphabet[id]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Images and video: G x G grids of palette indices, raster-scan tokenized.
// ---------------------------------------------------------------------------

struct GridImage {
    std::size_t side = 0;
    std::vector<std::uint32_t> cells;  // row-major, side*side entries

    std::uint32_t at(std::size_t r, std::size_t c) const { return cells[r * side + c]; }
    std::uint32_t& at(std::size_t r, std::size_t c) { return cells[r * side + c]; }
    bool operator==(const GridImage&) const = default;
};

struct VideoClip {
    std::vector<GridImage> frames;
    bool operator==(const VideoClip&) const = default;
};

struct SpeechUnits {
    std::vector<std::uint32_t> units;
    std::size_t rate = 1;
};

inline std::vector<TokenId> tokenize_image(const VocabLayout& layout, const GridImage& img) {
    if (img.cells.size() != img.side * img.side)
        throw std::invalid_argument("grid cell count does not match side*side");
    std::vector<TokenId> out;
    out.reserve(img.cells.size());
    for (std::uint32_t cell : img.cells) {
        if (cell >= layout.vision_size)
            throw std::invalid_argument("cell index " + std::to_string(cell) +
                                        " outside vision codebook of size " +
                                        std::to_string(layout.vision_size));
        out.push_back(vision_token(layout, cell));
    }
    return out;
}

inline GridImage detokenize_image(const VocabLayout& layout, const std::vector<TokenId>& tokens,
                                  std::size_t side) {
    if (tokens.size() != side * side)
        throw std::invalid_argument("token count " + std::to_string(tokens.size()) +
                                    " does not match side^2 = " + std::to_string(side * side));
    GridImage img;
    img.side = side;
    img.cells.reserve(tokens.size());
    for (TokenId id : tokens) {
        if (modality_of(layout, id) != Modality::Vision)
            throw std::invalid_argument("non-vision token " + std::to_string(id) +
                                        " in image sequence");
        img.cells.push_back(static_cast<std::uint32_t>(id - layout.text_size));
    }
    return img;
}

inline std::vector<TokenId> tokenize_video(const VocabLayout& layout, const VideoClip& clip) {
    std::vector<TokenId> out;
    for (const GridImage& frame : clip.frames) {
        if (frame.side != clip.frames.front().side)
            throw std::invalid_argument("video frames must share one grid side");
        auto toks = tokenize_image(layout, frame);
        out.insert(out.end(), toks.begin(), toks.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy speech: each character emits `rate` consecutive copies of its unit id.
// Detokenization collapses runs, tolerating imperfect run lengths. The
// round-trip is exact on strings without adjacent repeated characters (the
// valid domain of the run-collapse inverse); generators below only produce
// such strings for speech tasks.
// ---------------------------------------------------------------------------

inline std::vector<TokenId> tokenize_speech(const VocabLayout& layout, std::string_view text,
                                            std::size_t rate) {
    if (rate == 0) throw std::invalid_argument("speech rate must be >= 1");
    std::vector<TokenId> out;
    out.reserve(text.size() * rate);
    for (char c : text) {
        const std::uint32_t unit = char_index(c);
        if (unit >= layout.speech_size)
            throw std::invalid_argument(std::string("character '") + c +
                                        "' has no unit in a speech codebook of size " +
                                        std::to_string(layout.speech_size));
        TokenId id = speech_token(layout, unit);
        for (std::size_t k = 0; k < rate; ++k) out.push_back(id);
    }
    return out;
}

inline std::string detokenize_speech(const VocabLayout& layout, const std::vector<TokenId>& tokens) {
    std::string out;
    TokenId prev = 0;
    bool have_prev = false;
    for (TokenId id : tokens) {
        if (modality_of(layout, id) != Modality::Speech)
            throw std::invalid_argument("non-speech token " + std::to_string(id) +
                                        " in unit sequence");
        if (have_prev && id == prev) continue;
        std::uint32_t unit = static_cast<std::uint32_t>(id - layout.text_size - layout.vision_size);
        if (unit >= toy_alphabet_size())
            throw std::invalid_argument("speech unit " + std::to_string(unit) +
                                        " has no character mapping");
        out.push_back(kToyAlphabet[unit]);
        prev = id;
        have_prev = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic scene world: colored shapes on a grid. Deterministic captions,
// rendering, animation, and edit pairs give every template family paired
// data with known ground truth.
// ---------------------------------------------------------------------------

struct SceneObject {
    std::uint32_t shape = 0;
    std::uint32_t color = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const SceneObject&) const = default;
};

struct Scene {
    std::size_t side = 0;
    std::vector<SceneObject> objects;
    bool operator==(const Scene&) const = default;
};

struct SceneConfig {
    std::size_t side = 4;
    std::size_t min_objects = 1;
    std::size_t max_objects = 2;
    std::uint32_t n_shapes = 3;
    std::uint32_t n_colors = 4;
};

// Palette: cell 0 is empty; an object paints 1 + shape*n_colors + color.
// Encoding both attributes keeps captioning a function of the rendered grid.
inline std::uint32_t palette_code(const SceneConfig& cfg, std::uint32_t shape, std::uint32_t color) {
    return 1 + shape * cfg.n_colors + color;
}
inline std::size_t palette_size(const SceneConfig& cfg) {
    return 1 + static_cast<std::size_t>(cfg.n_shapes) * cfg.n_colors;
}

inline void canonicalize(Scene& scene) {
    std::sort(scene.objects.begin(), scene.objects.end(),
              [](const SceneObject& a, const SceneObject& b) {
                  return std::tie(a.row, a.col) < std::tie(b.row, b.col);
              });
}

inline Scene sample_scene(Rng& rng, const SceneConfig& cfg) {
    if (cfg.max_objects > cfg.side * cfg.side)
        throw std::invalid_argument("more objects requested than grid cells");
    if (cfg.min_objects == 0 || cfg.min_objects > cfg.max_objects)
        throw std::invalid_argument("invalid object count bounds");
    Scene scene;
    scene.side = cfg.side;
    std::size_t count =
        cfg.min_objects + static_cast<std::size_t>(rng.below(cfg.max_objects - cfg.min_objects + 1));
    std::vector<std::size_t> taken;
    while (scene.objects.size() < count) {
        std::size_t cell = static_cast<std::size_t>(rng.below(cfg.side * cfg.side));
        if (std::find(taken.begin(), taken.end(), cell) != taken.end()) continue;
        taken.push_back(cell);
        SceneObject obj;
        obj.shape = static_cast<std::uint32_t>(rng.below(cfg.n_shapes));
        obj.color = static_cast<std::uint32_t>(rng.below(cfg.n_colors));
        obj.row = cell / cfg.side;
        obj.col = cell % cfg.side;
        scene.objects.push_back(obj);
    }
    canonicalize(scene);
    return scene;
}

inline std::string object_phrase(const SceneObject& o) {
    return "color" + std::to_string(o.color) + " shape" + std::to_string(o.shape) + " at " +
           std::to_string(o.row) + " " + std::to_string(o.col);
}

// Canonical caption: objects in row-major order, joined by ", ".
inline std::string caption(const Scene& scene) {
    Scene sorted = scene;
    canonicalize(sorted);
    std::string out;
    for (std::size_t i = 0; i < sorted.objects.size(); ++i) {
        if (i) out += ", ";
        out += object_phrase(sorted.objects[i]);
    }
    return out;
}

// Position-free caption ("color2 shape0"): names the objects without
// placing them, so one caption admits every placement.
inline std::string attribute_caption(const Scene& scene) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> attrs;
    for (const SceneObject& o : scene.objects) attrs.push_back({o.color, o.shape});
    std::sort(attrs.begin(), attrs.end());
    std::string out;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) out += ", ";
        out += "color" + std::to_string(attrs[i].first) + " shape" + std::to_string(attrs[i].second);
    }
    return out;
}

// Attribute multiset comparison for position-free generation scoring.
inline bool same_attributes(const Scene& a, const Scene& b) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> xa, xb;
    for (const SceneObject& o : a.objects) xa.push_back({o.color, o.shape});
    for (const SceneObject& o : b.objects) xb.push_back({o.color, o.shape});
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    return xa == xb;
}

inline GridImage render(const Scene& scene, const SceneConfig& cfg) {
    GridImage img;
    img.side = scene.side;
    img.cells.assign(scene.side * scene.side, 0);
    for (const SceneObject& o : scene.objects) {
        if (o.row >= scene.side || o.col >= scene.side)
            throw std::invalid_argument("object outside grid");
        img.at(o.row, o.col) = palette_code(cfg, o.shape, o.color);
    }
    return img;
}

// Inverse of render; usable because the palette encodes (shape, color).
inline Scene scene_from_grid(const GridImage& img, const SceneConfig& cfg) {
    Scene scene;
    scene.side = img.side;
    for (std::size_t r = 0; r < img.side; ++r)
        for (std::size_t c = 0; c < img.side; ++c) {
            std::uint32_t cell = img.at(r, c);
            if (cell == 0) continue;
            std::uint32_t code = cell - 1;
            SceneObject obj;
            obj.shape = code / cfg.n_colors;
            obj.color = code % cfg.n_colors;
            obj.row = r;
            obj.col = c;
            if (obj.shape >= cfg.n_shapes)
                throw std::invalid_argument("cell value outside scene palette");
            scene.objects.push_back(obj);
        }
    return scene;
}

enum class MoveDir { Right, Left, Down, Up };

inline const char* dir_word(MoveDir d) {
    switch (d) {
        case MoveDir::Right: return "right";
        case MoveDir::Left: return "left";
        case MoveDir::Down: return "down";
        case MoveDir::Up: return "up";
    }
    return "?";
}

// The first object (canonical order) moves; direction derived from the
// scene so videos vary but stay a pure function of their scene.
inline MoveDir scene_move_dir(const Scene& scene) {
    const SceneObject& o = scene.objects.front();
    return static_cast<MoveDir>((o.shape + o.color + o.row + o.col) % 4);
}

// One-cell translation per frame, wrapping at grid edges. The moving object
// is painted last, so it passes over static objects.
inline VideoClip animate(const Scene& scene, const SceneConfig& cfg, std::size_t n_frames) {
    if (scene.objects.empty()) throw std::invalid_argument("cannot animate an empty scene");
    Scene sorted = scene;
    canonicalize(sorted);
    MoveDir dir = scene_move_dir(sorted);
    VideoClip clip;
    const std::size_t side = scene.side;
    for (std::size_t t = 0; t < n_frames; ++t) {
        Scene frame_scene = sorted;
        SceneObject& mover = frame_scene.objects.front();
        const std::size_t step = t % side;
        switch (dir) {
            case MoveDir::Right: mover.col = (mover.col + step) % side; break;
            case MoveDir::Left: mover.col = (mover.col + side - step % side) % side; break;
            case MoveDir::Down: mover.row = (mover.row + step) % side; break;
            case MoveDir::Up: mover.row = (mover.row + side - step % side) % side; break;
        }
        GridImage img;
        img.side = side;
        img.cells.assign(side * side, 0);
        for (std::size_t i = 1; i < frame_scene.objects.size(); ++i) {
            const SceneObject& o = frame_scene.objects[i];
            img.at(o.row, o.col) = palette_code(cfg, o.shape, o.color);
        }
        img.at(mover.row, mover.col) = palette_code(cfg, mover.shape, mover.color);
        clip.frames.push_back(std::move(img));
    }
    return clip;
}

inline std::string video_caption(const Scene& scene) {
    Scene sorted = scene;
    canonicalize(sorted);
    return caption(sorted) + " moves " + dir_word(scene_move_dir(sorted));
}

enum class EditOp { Recolor, Remove, Add };

struct EditPair {
    GridImage source;
    std::string instruction;
    GridImage target;
    Scene target_scene;
};

inline EditPair make_edit_pair(Rng& rng, const Scene& scene, const SceneConfig& cfg) {
    if (scene.objects.empty()) throw std::invalid_argument("cannot edit an empty scene");
    Scene src = scene;
    canonicalize(src);
    EditPair pair;
    pair.source = render(src, cfg);

    const bool full = src.objects.size() >= cfg.side * cfg.side;
    EditOp op;
    for (;;) {
        op = static_cast<EditOp>(rng.below(3));
        if (op == EditOp::Add && full) continue;  // no empty cell to add into
        break;
    }
    Scene tgt = src;
    switch (op) {
        case EditOp::Recolor: {
            std::size_t idx = static_cast<std::size_t>(rng.below(src.objects.size()));
            SceneObject& obj = tgt.objects[idx];
            std::uint32_t next = (obj.color + 1 + static_cast<std::uint32_t>(
                                                      rng.below(cfg.n_colors - 1))) %
                                 cfg.n_colors;
            pair.instruction =
                "recolor " + object_phrase(src.objects[idx]) + " to color" + std::to_string(next);
            obj.color = next;
            break;
        }
        case EditOp::Remove: {
            std::size_t idx = static_cast<std::size_t>(rng.below(src.objects.size()));
            pair.instruction = "remove " + object_phrase(src.objects[idx]);
            tgt.objects.erase(tgt.objects.begin() + static_cast<std::ptrdiff_t>(idx));
            break;
        }
        case EditOp::Add: {
            std::vector<std::size_t> empty_cells;
            GridImage occ = render(src, cfg);
            for (std::size_t cell = 0; cell < cfg.side * cfg.side; ++cell)
                if (occ.cells[cell] == 0) empty_cells.push_back(cell);
            std::size_t cell = empty_cells[rng.below(empty_cells.size())];
            SceneObject obj;
            obj.shape = static_cast<std::uint32_t>(rng.below(cfg.n_shapes));
            obj.color = static_cast<std::uint32_t>(rng.below(cfg.n_colors));
            obj.row = cell / cfg.side;
            obj.col = cell % cfg.side;
            pair.instruction = "add " + object_phrase(obj);
            tgt.objects.push_back(obj);
            break;
        }
    }
    canonicalize(tgt);
    pair.target = render(tgt, cfg);
    pair.target_scene = tgt;
    return pair;
}

}  // namespace omnidiff
