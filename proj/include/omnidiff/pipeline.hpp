#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnidiff/checkpoint.hpp"
#include "omnidiff/dataset.hpp"
#include "omnidiff/diffusion.hpp"
#include "omnidiff/merging.hpp"
#include "omnidiff/metrics.hpp"
#include "omnidiff/optimizer.hpp"
#include "omnidiff/sampler.hpp"

namespace omnidiff {

// ---------------------------------------------------------------------------
// Stage configuration
// ---------------------------------------------------------------------------

struct StageConfig {
    int stage = 2;
    std::map<TemplateFamily, double> task_mixture;
    bool eos_supervised = true;
    // Escape hatch for the scheduled-padding ablation study: allows a
    // stage >= 2 run to keep stage-1-style EOS exclusion. Never set by the
    // normal curriculum.
    bool eos_ablation = false;
    TaskCapacities caps;
    std::size_t steps = 1000;
    double peak_lr = 2.0e-5;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double p_drop = 0.1;  // conditioning dropout rate for image generation
    double weight_decay = 0.1;

    void validate() const {
        if (stage < 1 || stage > 3) throw std::invalid_argument("stage must be 1, 2 or 3");
        if (task_mixture.empty()) throw std::invalid_argument("empty task mixture");
        if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
        for (const auto& [family, weight] : task_mixture) {
            if (weight <= 0.0) throw std::invalid_argument("mixture weights must be positive");
            if (!family_available(family, stage))
                throw std::invalid_argument(std::string(family_name(family)) +
                                            " is not available at stage " + std::to_string(stage));
        }
        if (stage == 1 && eos_supervised)
            throw std::invalid_argument("stage 1 must not supervise EOS (scheduled padding)");
        if (stage >= 2 && !eos_supervised && !eos_ablation)
            throw std::invalid_argument("stages >= 2 supervise EOS unless eos_ablation is set");
    }

    EosSupervision eos_mode() const {
        return eos_supervised ? EosSupervision::ByStage : EosSupervision::ForceOff;
    }
};

namespace detail {

inline bool mixture_needs_speech(const std::map<TemplateFamily, double>& mixture) {
    return mixture.contains(TemplateFamily::SpeechToText) ||
           mixture.contains(TemplateFamily::TextToSpeech);
}
inline bool mixture_needs_vision(const std::map<TemplateFamily, double>& mixture) {
    for (const auto& [f, w] : mixture)
        if (f == TemplateFamily::VideoToText || f == TemplateFamily::ImageToText ||
            is_image_generation(f))
            return true;
    return false;
}

inline TemplateFamily sample_family(Rng& rng, const std::map<TemplateFamily, double>& mixture) {
    double total = 0.0;
    for (const auto& [f, w] : mixture) total += w;
    double u = rng.next_double() * total;
    for (const auto& [f, w] : mixture) {
        if (u < w) return f;
        u -= w;
    }
    return mixture.rbegin()->first;
}

}  // namespace detail

struct RunResult {
    Checkpoint checkpoint;
    std::vector<double> losses;
};

// Executes cfg.steps optimizer steps of mixed-modality masked-denoising
// training from `init`. Fully deterministic given (cfg, init, data).
inline RunResult run_stage(const StageConfig& cfg, const Checkpoint& init, const Dataset& data,
                           const DataConfig& data_cfg, unsigned n_threads = 0) {
    cfg.validate();
    const VocabLayout& layout = init.layout;
    if (detail::mixture_needs_speech(cfg.task_mixture) && layout.speech_size == 0)
        throw std::invalid_argument("task mixture needs speech tokens but checkpoint has none");
    if (detail::mixture_needs_vision(cfg.task_mixture) && layout.vision_size == 0)
        throw std::invalid_argument("task mixture needs vision tokens but checkpoint has none");
    for (const auto& [family, weight] : cfg.task_mixture) {
        auto it = data.find(family);
        if (it == data.end() || it->second.empty())
            throw std::invalid_argument(std::string("no data for family ") + family_name(family));
    }

    ModelParams<float> params = params_from_checkpoint(init);
    OptimizerConfig opt;
    opt.peak_lr = cfg.peak_lr;
    opt.weight_decay = cfg.weight_decay;
    opt.total_steps = cfg.steps;
    AdamWState<float> state = make_adamw_state(params);
    Rng rng(cfg.seed);

    RunResult result;
    result.losses.reserve(cfg.steps);
    for (std::size_t step_idx = 0; step_idx < cfg.steps; ++step_idx) {
        std::vector<TrainingExample> batch;
        batch.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const TemplateFamily family = detail::sample_family(rng, cfg.task_mixture);
            const auto& records = data.at(family);
            const Record& rec = records[rng.below(records.size())];
            AssembledSequence seq =
                assemble_record(layout, rec, cfg.stage, cfg.caps, data_cfg.image_scene,
                                data_cfg.video_scene, cfg.eos_mode());
            if (is_image_generation(family) && cfg.p_drop > 0.0)
                seq = drop_condition(rng, layout, seq, cfg.p_drop);
            CorruptionDraw draw = corrupt_for_training(rng, layout, seq);
            batch.push_back(make_training_example(seq, draw));
        }
        BackwardResult<float> back = forward_backward(params, batch, n_threads);
        optimizer_step(params, back.grads, state, opt, step_idx);
        result.losses.push_back(back.loss);
    }

    CheckpointMeta meta;
    meta.stage = cfg.stage;
    meta.step = cfg.steps;
    meta.seed = cfg.seed;
    meta.phase = "stage" + std::to_string(cfg.stage);
    result.checkpoint = checkpoint_from_params(params, meta);
    return result;
}

// ---------------------------------------------------------------------------
// Vocabulary extension of a trained checkpoint (fresh speech rows/columns).
// ---------------------------------------------------------------------------

inline Checkpoint vocab_extension_init(const Checkpoint& backbone, std::size_t speech_size,
                                       std::uint64_t seed) {
    if (backbone.layout.speech_size != 0)
        throw std::invalid_argument("checkpoint is already speech-extended");
    if (speech_size == 0) throw std::invalid_argument("speech_size must be positive");
    Checkpoint out = backbone;
    out.layout = extend_with_speech(backbone.layout, speech_size);
    out.model.vocab = out.layout;
    out.meta.phase = "extended";

    const std::size_t d = backbone.model.dim;
    const std::size_t v0 = backbone.layout.total_size();
    const std::size_t v1 = out.layout.total_size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Tensor<float> embed({v1, d});
    const Tensor<float>& old_embed = backbone.tensors.at("embed");
    std::copy(old_embed.data.begin(), old_embed.data.end(), embed.data.begin());
    Rng embed_rng(derive_seed(seed, "embed.ext"));
    for (std::size_t r = v0; r < v1; ++r)
        for (std::size_t c = 0; c < d; ++c)
            embed(r, c) = static_cast<float>(embed_rng.normal() * scale);
    out.tensors["embed"] = std::move(embed);

    Tensor<float> head({d, v1});
    const Tensor<float>& old_head = backbone.tensors.at("head");
    Rng head_rng(derive_seed(seed, "head.ext"));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < v0; ++c) head(r, c) = old_head(r, c);
    for (std::size_t c = v0; c < v1; ++c)
        for (std::size_t r = 0; r < d; ++r)
            head(r, c) = static_cast<float>(head_rng.normal() * scale);
    out.tensors["head"] = std::move(head);
    return out;
}

// Merge two checkpoints (backbone on V0, stage-1 on V1) per the strategy
// table; the result lives on the extended vocabulary.
inline Checkpoint merge_checkpoints(const Checkpoint& backbone, const Checkpoint& stage1,
                                    double alpha, MergeStrategy strategy) {
    if (backbone.layout.text_size != stage1.layout.text_size ||
        backbone.layout.vision_size != stage1.layout.vision_size ||
        backbone.layout.specials != stage1.layout.specials)
        throw std::invalid_argument("checkpoints disagree on the shared vocabulary ranges");
    if (stage1.layout.speech_size <= backbone.layout.speech_size)
        throw std::invalid_argument("stage-1 checkpoint does not extend the backbone vocabulary");
    if (backbone.model.dim != stage1.model.dim || backbone.model.layers != stage1.model.layers ||
        backbone.model.heads != stage1.model.heads || backbone.model.max_len != stage1.model.max_len)
        throw std::invalid_argument("checkpoints have different model geometry");

    MergeConfig cfg;
    cfg.alpha = alpha;
    cfg.strategy = strategy;
    cfg.v0_total = backbone.layout.total_size();

    Checkpoint out = stage1;
    out.tensors = merge(backbone.tensors, stage1.tensors, cfg);
    out.meta.phase = "merged";
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalOptions {
    TaskCapacities caps;
    std::size_t max_samples = 200;
    std::uint64_t seed = 0;
};

struct MetricRecord {
    std::string task;
    std::string metric;
    double value = 0.0;
};

struct EvalReport {
    std::vector<MetricRecord> records;

    double value(const std::string& task, const std::string& metric) const {
        for (const auto& r : records)
            if (r.task == task && r.metric == metric) return r.value;
        throw std::invalid_argument("no metric " + metric + " for task " + task);
    }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& r : records) {
            nlohmann::json j = {{"task", r.task}, {"metric", r.metric}, {"value", r.value}};
            out += j.dump();
            out += "\n";
        }
        return out;
    }
};

// The denoiser factory sees the ground-truth assembly of each sample; the
// model-backed path ignores it, while tests can inject a perfect oracle.
using DenoiserFactory = std::function<DenoiseFn(const AssembledSequence& truth)>;

namespace detail {

struct SampleOutcome {
    double exact = 0, cer = 0, token_acc = 0, scene_match = 0, length_acc = 0;
    std::size_t forward_calls = 0;
    std::string error;
};

struct TaskAccumulator {
    double exact = 0, cer = 0, token_acc = 0, scene_match = 0, length_acc = 0;
    std::size_t samples = 0, forward_calls = 0;
};

}  // namespace detail

inline EvalReport evaluate_with(const DenoiserFactory& factory, const VocabLayout& layout,
                                const Dataset& suite, const DataConfig& data_cfg,
                                const std::map<TemplateFamily, DecodeConfig>& decode_cfgs,
                                const EvalOptions& options, unsigned n_threads = 0) {
    EvalReport report;
    for (const auto& [family, records] : suite) {
        auto cfg_it = decode_cfgs.find(family);
        if (cfg_it == decode_cfgs.end()) continue;
        const DecodeConfig& base_decode = cfg_it->second;
        const std::size_t n = std::min<std::size_t>(records.size(), options.max_samples);
        std::vector<detail::SampleOutcome> outcomes(n);

        // generation is read-only in the model: samples run in parallel and
        // reduce in index order, so reports stay byte-deterministic
        auto run_sample = [&](std::size_t i) {
            detail::SampleOutcome& out = outcomes[i];
            try {
                const Record& rec = records[i];
                AssembledSequence truth = assemble_record(
                    layout, rec, 3, options.caps, data_cfg.image_scene, data_cfg.video_scene);
                if (is_image_generation(family) && base_decode.block_length < truth.target_length())
                    throw std::invalid_argument(
                        "image tasks decode as a single block; block_length too small");
                AssembledSequence prompt = make_generation_prompt(layout, truth);
                DecodeConfig decode = base_decode;
                decode.seed = derive_seed(options.seed, family_name(family), i);
                GenerateResult gen = generate(factory(truth), layout, prompt, decode);
                out.forward_calls = gen.forward_calls;

                std::vector<TokenId> span(
                    gen.tokens.begin() + static_cast<std::ptrdiff_t>(truth.target_begin),
                    gen.tokens.begin() + static_cast<std::ptrdiff_t>(truth.target_end));
                switch (family) {
                    case TemplateFamily::TextChat:
                    case TemplateFamily::ThinkingMode:
                    case TemplateFamily::ImageToText:
                    case TemplateFamily::VideoToText:
                    case TemplateFamily::SpeechToText: {
                        const std::string ref = reference_text(rec);
                        const std::string hyp =
                            tolerant_text(layout, truncate_at_eos(layout, span));
                        out.exact = (hyp == ref) ? 1 : 0;
                        out.cer = character_error_rate(hyp, ref);
                        break;
                    }
                    case TemplateFamily::TextToSpeech: {
                        const std::string ref = rec.text;
                        const std::vector<TokenId> truncated = truncate_at_eos(layout, span);
                        const std::string hyp = tolerant_speech_text(layout, truncated);
                        out.exact = (hyp == ref) ? 1 : 0;
                        out.cer = character_error_rate(hyp, ref);
                        const std::size_t ref_units = ref.size() * options.caps.speech_rate;
                        const std::size_t got = truncated.size();
                        const std::size_t diff =
                            got > ref_units ? got - ref_units : ref_units - got;
                        out.length_acc = (diff <= 1) ? 1 : 0;
                        break;
                    }
                    case TemplateFamily::TextToImage:
                    case TemplateFamily::ImageToImage: {
                        const Scene& expect =
                            family == TemplateFamily::TextToImage ? rec.scene : rec.target_scene;
                        std::size_t correct = 0;
                        for (std::size_t p = 0; p < span.size(); ++p)
                            if (span[p] == truth.tokens[truth.target_begin + p]) ++correct;
                        out.token_acc =
                            static_cast<double>(correct) / static_cast<double>(span.size());
                        bool match = false;
                        try {
                            GridImage img =
                                detokenize_image(layout, span, data_cfg.image_scene.side);
                            Scene got = scene_from_grid(img, data_cfg.image_scene);
                            Scene want = expect;
                            canonicalize(want);
                            // position-free prompts score by attribute multiset
                            match = rec.loose ? same_attributes(got, want) : got == want;
                        } catch (const std::exception&) {
                            match = false;
                        }
                        out.scene_match = match ? 1 : 0;
                        out.exact = match ? 1 : 0;
                        break;
                    }
                }
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        };

        unsigned hw = n_threads ? n_threads : std::thread::hardware_concurrency();
        if (hw <= 1 || n <= 1) {
            for (std::size_t i = 0; i < n; ++i) run_sample(i);
        } else {
            std::vector<std::thread> pool;
            std::atomic<std::size_t> next{0};
            const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(n));
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back([&]() {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= n) return;
                        run_sample(i);
                    }
                });
            for (auto& t : pool) t.join();
        }

        detail::TaskAccumulator acc;
        for (const auto& out : outcomes) {
            if (!out.error.empty()) throw std::invalid_argument(out.error);
            acc.exact += out.exact;
            acc.cer += out.cer;
            acc.token_acc += out.token_acc;
            acc.scene_match += out.scene_match;
            acc.length_acc += out.length_acc;
            acc.forward_calls += out.forward_calls;
            acc.samples += 1;
        }
        const double dn = static_cast<double>(acc.samples);
        const std::string task = family_name(family);
        auto push = [&](const char* metric, double v) {
            report.records.push_back({task, metric, v});
        };
        push("samples", dn);
        push("forward_calls_avg", acc.forward_calls / dn);
        switch (family) {
            case TemplateFamily::TextChat:
            case TemplateFamily::ThinkingMode:
            case TemplateFamily::ImageToText:
            case TemplateFamily::VideoToText:
            case TemplateFamily::SpeechToText:
                push("exact_match", acc.exact / dn);
                push("cer", acc.cer / dn);
                break;
            case TemplateFamily::TextToSpeech:
                push("exact_match", acc.exact / dn);
                push("cer", acc.cer / dn);
                push("length_acc", acc.length_acc / dn);
                break;
            case TemplateFamily::TextToImage:
            case TemplateFamily::ImageToImage:
                push("token_accuracy", acc.token_acc / dn);
                push("scene_match", acc.scene_match / dn);
                push("exact_match", acc.exact / dn);
                break;
        }
    }
    return report;
}

inline EvalReport evaluate(const Checkpoint& ckpt, const Dataset& suite, const DataConfig& data_cfg,
                           const std::map<TemplateFamily, DecodeConfig>& decode_cfgs,
                           const EvalOptions& options, unsigned n_threads = 0) {
    ModelParams<float> params = params_from_checkpoint(ckpt);
    DenoiserFactory factory = [&params](const AssembledSequence&) { return make_denoiser(params); };
    return evaluate_with(factory, ckpt.layout, suite, data_cfg, decode_cfgs, options, n_threads);
}

// ---------------------------------------------------------------------------
// Curriculum: backbone pretrain -> extend -> stage 1 -> merge -> stage 2 -> 3.
// ---------------------------------------------------------------------------

struct CurriculumConfig {
    ModelConfig base_model;  // vocabulary without speech (V0)
    std::size_t speech_extension = 48;
    std::uint64_t extension_seed = 7;
    double merge_alpha = 0.6;
    MergeStrategy merge_strategy = MergeStrategy::ModalityDisentangled;
    StageConfig backbone_cfg;  // stage-2 semantics restricted to text+image families
    StageConfig stage1_cfg;
    StageConfig stage2_cfg;
    StageConfig stage3_cfg;
    DataConfig backbone_data;
    DataConfig stage1_data;
    DataConfig stage2_data;
    DataConfig stage3_data;
};

struct CurriculumResult {
    Checkpoint backbone;
    Checkpoint stage1;
    Checkpoint merged;
    Checkpoint stage2;
    Checkpoint stage3;
    std::vector<double> losses_backbone, losses_stage1, losses_stage2, losses_stage3;
};

inline CurriculumResult run_curriculum(const CurriculumConfig& cfg, unsigned n_threads = 0,
                                       const std::function<void(const std::string&)>& log = {}) {
    auto say = [&](const std::string& msg) {
        if (log) log(msg);
    };
    CurriculumResult out;

    say("training backbone (text+image, V0)");
    Checkpoint init = checkpoint_from_params(init_params<float>(cfg.base_model),
                                             {0, 0, cfg.base_model.seed, "init"});
    Dataset backbone_data = generate_dataset(cfg.backbone_data);
    RunResult backbone = run_stage(cfg.backbone_cfg, init, backbone_data, cfg.backbone_data, n_threads);
    out.backbone = std::move(backbone.checkpoint);
    out.backbone.meta.phase = "backbone";
    out.losses_backbone = std::move(backbone.losses);

    say("extending vocabulary with speech units");
    Checkpoint extended = vocab_extension_init(out.backbone, cfg.speech_extension, cfg.extension_seed);

    say("stage 1: modality adaptation");
    Dataset stage1_data = generate_dataset(cfg.stage1_data);
    RunResult stage1 = run_stage(cfg.stage1_cfg, extended, stage1_data, cfg.stage1_data, n_threads);
    out.stage1 = std::move(stage1.checkpoint);
    out.losses_stage1 = std::move(stage1.losses);

    say("merging backbone and stage-1 checkpoints");
    out.merged = merge_checkpoints(out.backbone, out.stage1, cfg.merge_alpha, cfg.merge_strategy);

    say("stage 2: omnimodal SFT");
    Dataset stage2_data = generate_dataset(cfg.stage2_data);
    RunResult stage2 = run_stage(cfg.stage2_cfg, out.merged, stage2_data, cfg.stage2_data, n_threads);
    out.stage2 = std::move(stage2.checkpoint);
    out.losses_stage2 = std::move(stage2.losses);

    say("stage 3: continual SFT");
    Dataset stage3_data = generate_dataset(cfg.stage3_data);
    RunResult stage3 = run_stage(cfg.stage3_cfg, out.stage2, stage3_data, cfg.stage3_data, n_threads);
    out.stage3 = std::move(stage3.checkpoint);
    out.losses_stage3 = std::move(stage3.losses);
    return out;
}

// ---------------------------------------------------------------------------
// Config JSON (used by the CLI config files and shipped curriculum configs)
// ---------------------------------------------------------------------------

inline nlohmann::json capacities_to_json(const TaskCapacities& c) {
    return {{"chat_response", c.chat_response},
            {"caption", c.caption},
            {"video_caption", c.video_caption},
            {"asr_text", c.asr_text},
            {"speech_span", c.speech_span},
            {"speech_rate", c.speech_rate}};
}

inline TaskCapacities capacities_from_json(const nlohmann::json& j) {
    TaskCapacities c;
    c.chat_response = j.at("chat_response").get<std::size_t>();
    c.caption = j.at("caption").get<std::size_t>();
    c.video_caption = j.at("video_caption").get<std::size_t>();
    c.asr_text = j.at("asr_text").get<std::size_t>();
    c.speech_span = j.at("speech_span").get<std::size_t>();
    c.speech_rate = j.at("speech_rate").get<std::size_t>();
    return c;
}

inline nlohmann::json stage_config_to_json(const StageConfig& c) {
    nlohmann::json mixture = nlohmann::json::object();
    for (const auto& [f, w] : c.task_mixture) mixture[family_name(f)] = w;
    return {{"stage", c.stage},
            {"task_mixture", mixture},
            {"eos_supervised", c.eos_supervised},
            {"eos_ablation", c.eos_ablation},
            {"capacities", capacities_to_json(c.caps)},
            {"steps", c.steps},
            {"peak_lr", c.peak_lr},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"p_drop", c.p_drop},
            {"weight_decay", c.weight_decay}};
}

inline StageConfig stage_config_from_json(const nlohmann::json& j) {
    StageConfig c;
    c.stage = j.at("stage").get<int>();
    for (const auto& [name, w] : j.at("task_mixture").items()) {
        auto f = family_from_name(name);
        if (!f) throw std::invalid_argument("unknown family in mixture: " + name);
        c.task_mixture[*f] = w.get<double>();
    }
    c.eos_supervised = j.at("eos_supervised").get<bool>();
    if (j.contains("eos_ablation")) c.eos_ablation = j.at("eos_ablation").get<bool>();
    c.caps = capacities_from_json(j.at("capacities"));
    c.steps = j.at("steps").get<std::size_t>();
    c.peak_lr = j.at("peak_lr").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("p_drop")) c.p_drop = j.at("p_drop").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    return c;
}

inline nlohmann::json curriculum_config_to_json(const CurriculumConfig& c) {
    return {{"base_model", model_config_to_json(c.base_model)},
            {"speech_extension", c.speech_extension},
            {"extension_seed", c.extension_seed},
            {"merge_alpha", c.merge_alpha},
            {"merge_strategy", to_string(c.merge_strategy)},
            {"backbone", stage_config_to_json(c.backbone_cfg)},
            {"stage1", stage_config_to_json(c.stage1_cfg)},
            {"stage2", stage_config_to_json(c.stage2_cfg)},
            {"stage3", stage_config_to_json(c.stage3_cfg)},
            {"backbone_data", data_config_to_json(c.backbone_data)},
            {"stage1_data", data_config_to_json(c.stage1_data)},
            {"stage2_data", data_config_to_json(c.stage2_data)},
            {"stage3_data", data_config_to_json(c.stage3_data)}};
}

inline CurriculumConfig curriculum_config_from_json(const nlohmann::json& j) {
    CurriculumConfig c;
    c.base_model = model_config_from_json(j.at("base_model"));
    // config files may give sizes only; the standard special set fills in
    if (c.base_model.vocab.specials.empty())
        c.base_model.vocab =
            build_layout(c.base_model.vocab.text_size, c.base_model.vocab.vision_size,
                         c.base_model.vocab.speech_size, standard_special_names());
    c.speech_extension = j.at("speech_extension").get<std::size_t>();
    c.extension_seed = j.at("extension_seed").get<std::uint64_t>();
    c.merge_alpha = j.at("merge_alpha").get<double>();
    auto strat = merge_strategy_from_name(j.at("merge_strategy").get<std::string>());
    if (!strat) throw std::invalid_argument("unknown merge strategy");
    c.merge_strategy = *strat;
    c.backbone_cfg = stage_config_from_json(j.at("backbone"));
    c.stage1_cfg = stage_config_from_json(j.at("stage1"));
    c.stage2_cfg = stage_config_from_json(j.at("stage2"));
    c.stage3_cfg = stage_config_from_json(j.at("stage3"));
    c.backbone_data = data_config_from_json(j.at("backbone_data"));
    c.stage1_data = data_config_from_json(j.at("stage1_data"));
    c.stage2_data = data_config_from_json(j.at("stage2_data"));
    c.stage3_data = data_config_from_json(j.at("stage3_data"));
    return c;
}

inline nlohmann::json decode_config_to_json(const DecodeConfig& c) {
    return {{"steps", c.steps},
            {"block_length", c.block_length},
            {"schedule", c.schedule == Schedule::Linear ? "linear" : "cosine"},
            {"temperature", c.temperature},
            {"cfg_scale", c.cfg_scale},
            {"remask", c.remask == RemaskStrategy::LowConfidence ? "low_confidence" : "random"},
            {"seed", c.seed}};
}

inline DecodeConfig decode_config_from_json(const nlohmann::json& j) {
    DecodeConfig c;
    c.steps = j.at("steps").get<std::size_t>();
    c.block_length = j.at("block_length").get<std::size_t>();
    const std::string sched = j.at("schedule").get<std::string>();
    if (sched == "linear") c.schedule = Schedule::Linear;
    else if (sched == "cosine") c.schedule = Schedule::Cosine;
    else throw std::invalid_argument("unknown schedule: " + sched);
    c.temperature = j.at("temperature").get<double>();
    c.cfg_scale = j.at("cfg_scale").get<double>();
    const std::string remask = j.at("remask").get<std::string>();
    if (remask == "low_confidence") c.remask = RemaskStrategy::LowConfidence;
    else if (remask == "random") c.remask = RemaskStrategy::Random;
    else throw std::invalid_argument("unknown remask strategy: " + remask);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace omnidiff
