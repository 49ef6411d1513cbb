// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 5-8 share a single curriculum run driven by the shipped
// configs; its checkpoints and reports are left under --out for inspection.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnidiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace omnidiff;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    f >> j;
    return j;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient fidelity
// ---------------------------------------------------------------------------

Criterion criterion_gradients() {
    Criterion c{1, "gradient fidelity (analytic vs central finite differences)", false, ""};
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig cfg;
    cfg.dim = 32;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.max_len = 24;
    cfg.vocab = build_layout(32, 16, 8, standard_special_names());
    cfg.seed = 41;
    ModelParams<double> params = init_params<double>(cfg);
    const VocabLayout& layout = cfg.vocab;

    // batch across template families (raw ids; the toy-56 layout has no
    // full text alphabet)
    Rng rng(17);
    std::vector<std::pair<AssembledSequence, CorruptionDraw>> drawn;
    auto add = [&](TemplateFamily family, TemplateParts parts, std::size_t capacity) {
        AssembledSequence seq = assemble(layout, family, parts, 2, capacity);
        if (seq.size() > cfg.max_len) throw std::logic_error("gradcheck sequence too long");
        drawn.push_back({seq, corrupt_for_training(rng, layout, seq)});
    };
    {
        TemplateParts p;
        p.prompt = {1, 2, 3};
        p.response = {4, 5, 6};
        add(TemplateFamily::TextChat, p, 5);
    }
    {
        TemplateParts p;
        p.prompt = {7, 8};
        p.target_tokens = {vision_token(layout, 1), vision_token(layout, 2),
                           vision_token(layout, 3), vision_token(layout, 4)};
        add(TemplateFamily::TextToImage, p, 4);
    }
    {
        TemplateParts p;
        p.input_tokens = {speech_token(layout, 0), speech_token(layout, 0),
                          speech_token(layout, 1), speech_token(layout, 1)};
        p.response = {2, 3};
        add(TemplateFamily::SpeechToText, p, 4);
    }
    std::vector<TrainingExample> batch;
    for (const auto& [seq, draw] : drawn) batch.push_back(make_training_example(seq, draw));

    BackwardResult<double> res = forward_backward(params, batch, 1);
    auto batch_loss = [&](const ModelParams<double>& p) {
        double total = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Tensor<double> logits = forward(p, batch[i].tokens);
            total += eq1_loss_from_logits(logits, drawn[i].first, drawn[i].second);
        }
        return total / static_cast<double>(batch.size());
    };

    const double h = 1e-4;
    std::size_t checked = 0, failed = 0;
    double worst = 0.0;
    Rng pick(91);
    std::vector<std::string> names;
    for (const auto& [name, g] : res.grads) names.push_back(name);
    while (checked < 220) {
        const std::string& name = names[pick.below(names.size())];
        Tensor<double>& t = params.at(name);
        const std::size_t idx = pick.below(t.numel());
        const double orig = t.data[idx];
        t.data[idx] = orig + h;
        const double lp = batch_loss(params);
        t.data[idx] = orig - h;
        const double lm = batch_loss(params);
        t.data[idx] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = res.grads.at(name).data[idx];
        const double rel = std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-8);
        worst = std::max(worst, rel);
        if (rel >= 1e-4) ++failed;
        ++checked;
    }
    const double secs = seconds_since(t0);
    c.pass = failed == 0 && secs < 60.0;
    c.detail = std::to_string(checked) + " coordinates, worst rel err " + fmt(worst) + ", " +
               fmt(secs) + "s";
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 2: Monte Carlo loss estimator vs exact enumeration
// ---------------------------------------------------------------------------

Criterion criterion_loss_oracle() {
    Criterion c{2, "loss-estimator oracle (1e5 redraws vs mask-pattern enumeration)", false, ""};
    const auto t0 = std::chrono::steady_clock::now();

    VocabLayout layout = build_layout(32, 16, 8, standard_special_names());
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.max_len = 12;
    cfg.vocab = layout;
    cfg.seed = 13;
    ModelParams<float> params = init_params<float>(cfg);

    TemplateParts parts;
    parts.prompt = {1};
    parts.response = {2, 3, 4};
    AssembledSequence seq = assemble(layout, TemplateFamily::TextChat, parts, 2, 3);

    std::string detail;
    bool all_ok = true;
    for (double t : {0.25, 0.5, 0.9}) {
        double exact = 0.0, mass = 0.0;
        for (unsigned pattern = 1; pattern < 8; ++pattern) {
            std::vector<double> uniforms(3);
            for (int b = 0; b < 3; ++b) uniforms[b] = (pattern >> b) & 1 ? 0.0 : 1.0;
            CorruptionDraw draw = corrupt_with_uniforms(layout, seq, t, uniforms);
            const int bits = __builtin_popcount(pattern);
            const double w = std::pow(t, bits) * std::pow(1.0 - t, 3 - bits);
            exact += w * loss(params, seq, draw);
            mass += w;
        }
        exact /= mass;

        Rng rng(derive_seed(7, "mc", static_cast<std::uint64_t>(t * 100)));
        const int trials = 100000;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < trials; ++i) {
            CorruptionDraw draw = corrupt(rng, layout, seq, t);
            const double v = loss(params, seq, draw);
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / trials;
        const double se = std::sqrt((sumsq / trials - mean * mean) / trials);
        const double dev = std::abs(mean - exact);
        const bool ok = dev <= 3.0 * se;
        all_ok = all_ok && ok;
        detail += "t=" + fmt(t) + ": |mc-exact|=" + fmt(dev) + " vs 3se=" + fmt(3.0 * se) + "; ";
    }
    const double secs = seconds_since(t0);
    c.pass = all_ok && secs < 300.0;
    c.detail = detail + fmt(secs) + "s";
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 3: sampler invariants over randomized generate() calls
// ---------------------------------------------------------------------------

Criterion criterion_sampler_invariants() {
    Criterion c{3, "sampler invariants (1000 randomized generate calls)", false, ""};
    const auto t0 = std::chrono::steady_clock::now();

    VocabLayout layout = build_layout(64, 16, 48, standard_special_names());
    DataConfig dc;
    dc.families = all_families();
    dc.records_per_family = 200;
    dc.image_scene.side = 3;
    dc.image_scene.max_objects = 1;
    dc.video_scene.side = 2;
    dc.video_frames = 2;
    dc.speech_max_len = 5;
    dc.chat_terms = 3;
    dc.seed = 404;
    Dataset data = generate_dataset(dc);
    TaskCapacities caps;
    caps.chat_response = 14;
    caps.caption = 22;
    caps.video_caption = 34;

    std::vector<ModelParams<float>> models;
    for (std::uint64_t s = 0; s < 4; ++s) {
        ModelConfig cfg;
        cfg.dim = 16;
        cfg.layers = 1;
        cfg.heads = 2;
        cfg.max_len = 80;
        cfg.vocab = layout;
        cfg.seed = 1000 + s;
        models.push_back(init_params<float>(cfg));
    }

    Rng meta(20240);
    std::size_t violations = 0, calls = 0;
    std::string first_violation;
    auto fams = all_families();
    while (calls < 1000) {
        const TemplateFamily family = fams[meta.below(fams.size())];
        const auto& records = data.at(family);
        const Record& rec = records[meta.below(records.size())];
        AssembledSequence truth = assemble_record(layout, rec, 3, caps, dc.image_scene, dc.video_scene);
        AssembledSequence prompt = make_generation_prompt(layout, truth);
        const std::size_t span = truth.target_length();

        DecodeConfig cfg;
        cfg.block_length = 1 + meta.below(span);
        const std::size_t blocks =
            is_image_generation(family) ? 1 : (span + cfg.block_length - 1) / cfg.block_length;
        cfg.steps = blocks + meta.below(span - blocks + 1);
        cfg.schedule = meta.below(2) ? Schedule::Linear : Schedule::Cosine;
        cfg.temperature = meta.below(2) ? 0.0 : 0.5 + meta.next_double();
        cfg.remask = meta.below(2) ? RemaskStrategy::LowConfidence : RemaskStrategy::Random;
        cfg.seed = meta.next_u64();
        if (is_image_generation(family)) {
            cfg.block_length = std::max(cfg.block_length, span);
            if (meta.below(2)) cfg.cfg_scale = 3.5;
        }
        const ModelParams<float>& model = models[meta.below(models.size())];

        GenerateResult a = generate(model, prompt, cfg);
        GenerateResult b = generate(model, prompt, cfg);
        ++calls;

        auto violate = [&](const std::string& why) {
            ++violations;
            if (first_violation.empty())
                first_violation = why + " (family " + std::string(family_name(family)) + ")";
        };
        if (a.tokens != b.tokens) violate("seed determinism");
        const bool guided = is_image_generation(family) && cfg.cfg_scale != 1.0;
        const std::size_t expected_calls = cfg.steps * (guided ? 2 : 1);
        if (a.forward_calls != expected_calls) violate("forward-call budget");
        for (std::size_t i = 0; i < prompt.size(); ++i)
            if ((i < prompt.target_begin || i >= prompt.target_end) &&
                a.tokens[i] != prompt.tokens[i]) {
                violate("conditioning immutability");
                break;
            }
        bool strict = true;
        for (const StepTrace& t : a.trace)
            if (t.masked_after >= t.masked_before) strict = false;
        if (!strict) violate("strict mask decrease");
        std::size_t leftover = 0;
        for (std::size_t i = prompt.target_begin; i < prompt.target_end; ++i)
            if (a.tokens[i] == layout.mask_id()) ++leftover;
        if (leftover != 0) violate("zero masks at completion");
    }
    const double secs = seconds_since(t0);
    c.pass = violations == 0;
    c.detail = std::to_string(calls) + " calls, " + std::to_string(violations) + " violations" +
               (first_violation.empty() ? "" : " (first: " + first_violation + ")") + ", " +
               fmt(secs) + "s";
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 4: merging algebra
// ---------------------------------------------------------------------------

Criterion criterion_merging_algebra() {
    Criterion c{4, "merging algebra (endpoints, slice independence, symmetry)", false, ""};
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig c0, c1;
    c0.dim = c1.dim = 12;
    c0.layers = c1.layers = 2;
    c0.heads = c1.heads = 2;
    c0.max_len = c1.max_len = 16;
    c0.vocab = build_layout(32, 16, 0, standard_special_names());
    c1.vocab = build_layout(32, 16, 8, standard_special_names());
    c0.seed = 61;
    c1.seed = 62;
    NamedTensors<float> theta0 = init_params<float>(c0).tensors;
    NamedTensors<float> theta1 = init_params<float>(c1).tensors;
    const std::size_t v0 = 48;

    std::size_t failures = 0;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) {
            ++failures;
            std::cerr << "  merging algebra failure: " << what << "\n";
        }
    };

    for (MergeStrategy strat : {MergeStrategy::Shared, MergeStrategy::Stage1Only,
                                MergeStrategy::ModalityDisentangled}) {
        for (double alpha : {0.0, 1.0}) {
            MergeConfig mc{alpha, strat, v0};
            NamedTensors<float> merged = merge(theta0, theta1, mc);
            for (const auto& [name, m] : merged) {
                const Tensor<float>& a = theta0.at(name);
                const Tensor<float>& b = theta1.at(name);
                if (auto axis = vocab_axis(name)) {
                    // extension slice always from theta1
                    if (*axis == 0) {
                        for (std::size_t r = v0; r < b.shape[0]; ++r)
                            for (std::size_t col = 0; col < b.shape[1]; ++col)
                                expect(m(r, col) == b(r, col), "extension slice rows");
                    } else {
                        for (std::size_t r = 0; r < b.shape[0]; ++r)
                            for (std::size_t col = v0; col < b.shape[1]; ++col)
                                expect(m(r, col) == b(r, col), "extension slice cols");
                    }
                    // V0 slice per strategy table
                    const Tensor<float>* want = nullptr;
                    if (strat == MergeStrategy::Stage1Only) want = &b;
                    else if (strat == MergeStrategy::ModalityDisentangled) want = &a;
                    else want = (alpha == 1.0) ? &a : &b;
                    if (*axis == 0) {
                        for (std::size_t r = 0; r < v0; ++r)
                            for (std::size_t col = 0; col < a.shape[1]; ++col)
                                expect(m(r, col) == (*want)(r, col), "v0 slice rows");
                    } else {
                        for (std::size_t r = 0; r < a.shape[0]; ++r)
                            for (std::size_t col = 0; col < v0; ++col)
                                expect(m(r, col) == (*want)(r, col), "v0 slice cols");
                    }
                } else {
                    const Tensor<float>& want = (alpha == 1.0) ? a : b;
                    expect(m.data == want.data, "non-vocab endpoint");
                }
            }
        }
    }

    // V0-slice independence from alpha and from theta1's V0 entries
    {
        MergeConfig mc{0.37, MergeStrategy::ModalityDisentangled, v0};
        NamedTensors<float> base = merge(theta0, theta1, mc);
        NamedTensors<float> perturbed = theta1;
        for (std::size_t r = 0; r < v0; ++r)
            for (std::size_t col = 0; col < 12; ++col) perturbed.at("embed")(r, col) += 11.0f;
        for (std::size_t r = 0; r < 12; ++r)
            for (std::size_t col = 0; col < v0; ++col) perturbed.at("head")(r, col) += 3.0f;
        mc.alpha = 0.81;
        NamedTensors<float> other = merge(theta0, perturbed, mc);
        for (std::size_t r = 0; r < v0; ++r)
            for (std::size_t col = 0; col < 12; ++col)
                expect(base.at("embed")(r, col) == other.at("embed")(r, col),
                       "embed v0 slice independence");
        for (std::size_t r = 0; r < 12; ++r)
            for (std::size_t col = 0; col < v0; ++col)
                expect(base.at("head")(r, col) == other.at("head")(r, col),
                       "head v0 slice independence");
    }

    // interpolation symmetry
    {
        Rng rng(5);
        Tensor<float> x({6, 5}), y({6, 5});
        for (auto& v : x.data) v = static_cast<float>(rng.normal());
        for (auto& v : y.data) v = static_cast<float>(rng.normal());
        for (double alpha : {0.0, 0.2, 0.5, 0.77, 1.0}) {
            Tensor<float> ab = interpolate(x, y, alpha);
            Tensor<float> ba = interpolate(y, x, 1.0 - alpha);
            for (std::size_t i = 0; i < ab.numel(); ++i)
                expect(std::abs(ab.data[i] - ba.data[i]) <= 1e-6f, "interpolation symmetry");
        }
    }

    const double secs = seconds_since(t0);
    c.pass = failures == 0 && secs < 60.0;
    c.detail = std::to_string(failures) + " failures, " + fmt(secs) + "s";
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 9: checkpoint persistence
// ---------------------------------------------------------------------------

Criterion criterion_persistence(const fs::path& out_dir) {
    Criterion c{9, "checkpoint persistence (bitwise round trips)", false, ""};
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t failures = 0;
    const fs::path path = out_dir / "persist_probe.bin";

    for (std::uint64_t i = 0; i < 20; ++i) {
        ModelConfig cfg;
        cfg.dim = 8 + 4 * (i % 3);
        cfg.layers = 1 + i % 2;
        cfg.heads = 2;
        cfg.max_len = 16;
        const std::size_t speech = (i % 4 == 0) ? 0 : 8;
        cfg.vocab = build_layout(32, 16, speech, standard_special_names());
        cfg.seed = 500 + i;
        Checkpoint ckpt;
        if (i == 19) {
            // post-merge checkpoint on the extended vocabulary
            ModelConfig base = cfg;
            base.vocab = build_layout(32, 16, 0, standard_special_names());
            Checkpoint b = checkpoint_from_params(init_params<float>(base), {0, 0, i, "backbone"});
            Checkpoint ext = vocab_extension_init(b, 8, 77);
            ext.meta.phase = "stage1";
            ckpt = merge_checkpoints(b, ext, 0.6, MergeStrategy::ModalityDisentangled);
        } else {
            ckpt = checkpoint_from_params(init_params<float>(cfg),
                                          {static_cast<int>(i % 4), i, 500 + i, "probe"});
        }
        save_checkpoint(ckpt, path.string());
        Checkpoint loaded = load_checkpoint(path.string());
        if (serialize_checkpoint(ckpt) != serialize_checkpoint(loaded)) ++failures;
    }
    std::error_code ec;
    fs::remove(path, ec);
    const double secs = seconds_since(t0);
    c.pass = failures == 0;
    c.detail = "20 round trips, " + std::to_string(failures) + " mismatches, " + fmt(secs) + "s";
    return c;
}

// ---------------------------------------------------------------------------
// Criteria 5-8 share the curriculum artifacts
// ---------------------------------------------------------------------------

struct CurriculumArtifacts {
    CurriculumConfig config;
    CurriculumResult result;
    Dataset eval_suite;
    DataConfig eval_data;
    EvalOptions eval_options;
    std::map<TemplateFamily, DecodeConfig> decode_default;
    std::map<TemplateFamily, DecodeConfig> decode_sampling;
    std::size_t sampling_max_samples = 400;
};

std::map<TemplateFamily, DecodeConfig> decode_map_from_json(const nlohmann::json& j) {
    std::map<TemplateFamily, DecodeConfig> out;
    for (const auto& [name, cfg] : j.items()) {
        auto f = family_from_name(name);
        if (!f) throw std::runtime_error("unknown family in decode config: " + name);
        out[*f] = decode_config_from_json(cfg);
    }
    return out;
}

CurriculumArtifacts run_shared_curriculum(const fs::path& configs, const fs::path& out_dir,
                                          unsigned threads) {
    CurriculumArtifacts art;
    art.config = curriculum_config_from_json(load_json_file((configs / "curriculum.json").string()));
    art.eval_data = data_config_from_json(load_json_file((configs / "data_eval.json").string()));
    art.eval_suite = generate_dataset(art.eval_data);

    nlohmann::json eval_json = load_json_file((configs / "eval.json").string());
    art.decode_default = decode_map_from_json(eval_json.at("decode"));
    art.eval_options.caps = capacities_from_json(eval_json.at("capacities"));
    art.eval_options.max_samples = eval_json.value("max_samples", 200);
    art.eval_options.seed = 90210;

    nlohmann::json sampling_json = load_json_file((configs / "eval_sampling.json").string());
    art.decode_sampling = decode_map_from_json(sampling_json.at("decode"));
    art.sampling_max_samples = sampling_json.value("max_samples", 400);

    art.result = run_curriculum(art.config, threads, [](const std::string& msg) {
        std::cerr << "  [curriculum] " << msg << "\n";
    });
    save_checkpoint(art.result.backbone, (out_dir / "backbone.bin").string());
    save_checkpoint(art.result.stage1, (out_dir / "stage1.bin").string());
    save_checkpoint(art.result.merged, (out_dir / "merged.bin").string());
    save_checkpoint(art.result.stage2, (out_dir / "stage2.bin").string());
    save_checkpoint(art.result.stage3, (out_dir / "stage3.bin").string());
    return art;
}

Criterion criterion_learnability(const CurriculumArtifacts& art, const fs::path& out_dir,
                                 unsigned threads, double curriculum_secs) {
    Criterion c{5, "synthetic-task learnability after the full curriculum", false, ""};
    EvalReport report = evaluate(art.result.stage3, art.eval_suite, art.eval_data,
                                 art.decode_default, art.eval_options, threads);
    std::ofstream f(out_dir / "report_stage3.jsonl");
    f << report.to_jsonl();

    const double asr = report.value("asr", "exact_match");
    const double i2t = report.value("i2t", "exact_match");
    const double t2i = report.value("t2i", "scene_match");
    const double tts = report.value("tts", "cer");
    c.pass = asr >= 0.95 && i2t >= 0.95 && t2i >= 0.95 && tts <= 0.05 &&
             curriculum_secs < 7200.0;
    c.detail = "asr EM=" + fmt(asr) + " (>=0.95), i2t EM=" + fmt(i2t) + " (>=0.95), t2i scene=" +
               fmt(t2i) + " (>=0.95), tts CER=" + fmt(tts) + " (<=0.05), curriculum " +
               fmt(curriculum_secs) + "s";
    return c;
}

Criterion criterion_merging_direction(const CurriculumArtifacts& art, const fs::path& out_dir,
                                      unsigned threads) {
    Criterion c{6, "merging-strategy direction at alpha=0.6 (no extra training)", false, ""};

    std::vector<std::pair<std::string, Checkpoint>> models;
    models.push_back({"backbone", art.result.backbone});
    models.push_back({"stage1", art.result.stage1});
    for (MergeStrategy s : {MergeStrategy::Shared, MergeStrategy::Stage1Only,
                            MergeStrategy::ModalityDisentangled})
        models.push_back(
            {to_string(s), merge_checkpoints(art.result.backbone, art.result.stage1, 0.6, s)});

    // continuous composites separate weak post-merge models where exact
    // match saturates at zero
    auto old_score = [&](const EvalReport& r) {
        return ((1.0 - r.value("chat", "cer")) + (1.0 - r.value("i2t", "cer")) +
                r.value("t2i", "token_accuracy")) / 3.0;
    };
    auto new_score = [&](const EvalReport& r) {
        return ((1.0 - r.value("asr", "cer")) + (1.0 - r.value("tts", "cer"))) / 2.0;
    };

    std::map<TemplateFamily, DecodeConfig> old_cfgs, new_cfgs;
    for (TemplateFamily f : {TemplateFamily::TextChat, TemplateFamily::ImageToText,
                             TemplateFamily::TextToImage})
        old_cfgs[f] = art.decode_default.at(f);
    for (TemplateFamily f : {TemplateFamily::SpeechToText, TemplateFamily::TextToSpeech})
        new_cfgs[f] = art.decode_default.at(f);

    EvalOptions opt = art.eval_options;
    opt.max_samples = 150;
    std::map<std::string, double> olds, news;
    std::string table = "model,old_score,new_score\n";
    for (const auto& [name, ckpt] : models) {
        EvalReport old_rep = evaluate(ckpt, art.eval_suite, art.eval_data, old_cfgs, opt, threads);
        olds[name] = old_score(old_rep);
        if (ckpt.layout.speech_size > 0) {
            EvalReport new_rep =
                evaluate(ckpt, art.eval_suite, art.eval_data, new_cfgs, opt, threads);
            news[name] = new_score(new_rep);
        } else {
            news[name] = 0.0;  // backbone has no speech range
        }
        table += name + "," + fmt(olds[name]) + "," + fmt(news[name]) + "\n";
    }
    std::ofstream f(out_dir / "merging_direction.csv");
    f << table;
    std::cerr << table;

    const std::string md = to_string(MergeStrategy::ModalityDisentangled);
    const std::string s1o = to_string(MergeStrategy::Stage1Only);
    const std::string sh = to_string(MergeStrategy::Shared);
    const bool md_old = olds[md] > olds[s1o] && olds[md] > olds[sh];
    const bool s1o_new = news[s1o] >= news[md] && news[s1o] >= news[sh];
    c.pass = md_old && s1o_new;
    c.detail = "old: md=" + fmt(olds[md]) + " s1only=" + fmt(olds[s1o]) + " shared=" +
               fmt(olds[sh]) + (md_old ? " (md strictly best)" : " (VIOLATION)") +
               "; new: s1only=" + fmt(news[s1o]) + " md=" + fmt(news[md]) + " shared=" +
               fmt(news[sh]) + (s1o_new ? " (s1only best)" : " (VIOLATION)");
    return c;
}

Criterion criterion_eos_direction(const CurriculumArtifacts& art, const fs::path& configs,
                                  const fs::path& out_dir, unsigned threads) {
    Criterion c{7, "scheduled-EOS direction (stage-2 EOS supervision vs ablation)", false, ""};

    StageConfig on_cfg = stage_config_from_json(load_json_file((configs / "eos_on.json").string()));
    StageConfig off_cfg =
        stage_config_from_json(load_json_file((configs / "eos_off.json").string()));
    Dataset stage2_data = generate_dataset(art.config.stage2_data);

    RunResult on = run_stage(on_cfg, art.result.merged, stage2_data, art.config.stage2_data, threads);
    RunResult off =
        run_stage(off_cfg, art.result.merged, stage2_data, art.config.stage2_data, threads);
    save_checkpoint(on.checkpoint, (out_dir / "eos_on.bin").string());
    save_checkpoint(off.checkpoint, (out_dir / "eos_off.bin").string());

    std::map<TemplateFamily, DecodeConfig> tts_cfg{
        {TemplateFamily::TextToSpeech, art.decode_default.at(TemplateFamily::TextToSpeech)}};
    EvalOptions opt = art.eval_options;
    opt.max_samples = 250;
    EvalReport rep_on = evaluate(on.checkpoint, art.eval_suite, art.eval_data, tts_cfg, opt, threads);
    EvalReport rep_off =
        evaluate(off.checkpoint, art.eval_suite, art.eval_data, tts_cfg, opt, threads);

    const double acc_on = rep_on.value("tts", "length_acc");
    const double acc_off = rep_off.value("tts", "length_acc");
    const double n = rep_on.value("tts", "samples");
    c.pass = n >= 200 && (acc_on - acc_off) >= 0.10;
    c.detail = "tts length-acc with EOS=" + fmt(acc_on) + ", without=" + fmt(acc_off) +
               ", gap=" + fmt(acc_on - acc_off) + " (>=0.10), n=" + fmt(n);
    return c;
}

Criterion criterion_steps_direction(const CurriculumArtifacts& art, const fs::path& out_dir,
                                    unsigned threads) {
    Criterion c{8, "steps-vs-quality direction (t2i sweep + text budget)", false, ""};

    // T2I sweep on position-free prompts under sampling decode
    DataConfig sweep_data = art.eval_data;
    sweep_data.families = {TemplateFamily::TextToImage};
    sweep_data.t2i_loose_fraction = 1.0;
    sweep_data.seed = 900002;
    Dataset sweep_suite = generate_dataset(sweep_data);

    EvalOptions opt = art.eval_options;
    opt.max_samples = art.sampling_max_samples;
    const DecodeConfig base = art.decode_sampling.at(TemplateFamily::TextToImage);
    std::vector<std::size_t> steps_list{1, 2, 4, 8, 16, 32};
    std::vector<double> scores;
    std::string csv = "steps,scene_match\n";
    for (std::size_t s : steps_list) {
        DecodeConfig cfg = base;
        cfg.steps = s;
        std::map<TemplateFamily, DecodeConfig> one{{TemplateFamily::TextToImage, cfg}};
        EvalReport rep = evaluate(art.result.stage3, sweep_suite, sweep_data, one, opt, threads);
        scores.push_back(rep.value("t2i", "scene_match"));
        csv += std::to_string(s) + "," + fmt(scores.back()) + "\n";
    }
    std::ofstream f(out_dir / "t2i_steps_sweep.csv");
    f << csv;
    std::cerr << csv;

    // plateau: first point within 2pp of the peak; before it the curve may
    // dip at most 2pp between consecutive points
    const double peak = *std::max_element(scores.begin(), scores.end());
    std::size_t plateau = 0;
    while (plateau < scores.size() && scores[plateau] < peak - 0.02) ++plateau;
    bool monotone = true;
    for (std::size_t i = 0; i + 1 <= plateau && i + 1 < scores.size(); ++i)
        if (scores[i + 1] < scores[i] - 0.02) monotone = false;
    const bool t2i_gap = scores.back() - scores.front() >= 0.05;

    // text budget: exact match at 4x span steps vs 0.25x, under the same
    // sampling decode the sweep uses
    std::map<TemplateFamily, DecodeConfig> chat_map;
    DecodeConfig chat_cfg = art.decode_sampling.at(TemplateFamily::TextChat);
    const std::size_t span = art.eval_options.caps.chat_response;
    EvalOptions chat_opt = art.eval_options;
    chat_opt.max_samples = 300;
    chat_cfg.steps = std::max<std::size_t>(1, span / 4);
    chat_map[TemplateFamily::TextChat] = chat_cfg;
    EvalReport low = evaluate(art.result.stage3, art.eval_suite, art.eval_data, chat_map, chat_opt,
                              threads);
    chat_cfg.steps = 4 * span;
    chat_map[TemplateFamily::TextChat] = chat_cfg;
    EvalReport high = evaluate(art.result.stage3, art.eval_suite, art.eval_data, chat_map, chat_opt,
                               threads);
    const double em_low = low.value("chat", "exact_match");
    const double em_high = high.value("chat", "exact_match");
    const bool text_gap = (em_high - em_low) >= 0.10;

    c.pass = monotone && t2i_gap && text_gap;
    c.detail = "t2i s1=" + fmt(scores.front()) + " s32=" + fmt(scores.back()) +
               (t2i_gap ? " (gap ok)" : " (gap VIOLATION)") +
               (monotone ? ", monotone to plateau" : ", non-monotone (VIOLATION)") +
               "; chat 0.25x=" + fmt(em_low) + " 4x=" + fmt(em_high) +
               (text_gap ? " (gap ok)" : " (gap VIOLATION)");
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out_dir = "acceptance_runs";
    fs::path configs = "configs";
    unsigned threads = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc) out_dir = argv[++i];
        else if (arg == "--configs" && i + 1 < argc) configs = argv[++i];
        else if (arg == "--threads" && i + 1 < argc) threads = std::stoul(argv[++i]);
    }
    fs::create_directories(out_dir);

    std::vector<Criterion> results;
    auto run = [&](Criterion (*fn)()) {
        try {
            results.push_back(fn());
        } catch (const std::exception& e) {
            Criterion c{0, "internal", false, std::string("exception: ") + e.what()};
            results.push_back(c);
        }
    };
    run(criterion_gradients);
    run(criterion_loss_oracle);
    run(criterion_sampler_invariants);
    run(criterion_merging_algebra);
    try {
        results.push_back(criterion_persistence(out_dir));
    } catch (const std::exception& e) {
        results.push_back({9, "checkpoint persistence", false, std::string("exception: ") + e.what()});
    }

    try {
        std::cerr << "running the full toy curriculum (criteria 5-8)...\n";
        const auto t0 = std::chrono::steady_clock::now();
        CurriculumArtifacts art = run_shared_curriculum(configs, out_dir, threads);
        const double curriculum_secs = seconds_since(t0);
        std::cerr << "curriculum finished in " << fmt(curriculum_secs) << "s\n";

        results.push_back(criterion_learnability(art, out_dir, threads, curriculum_secs));
        results.push_back(criterion_merging_direction(art, out_dir, threads));
        results.push_back(criterion_eos_direction(art, configs, out_dir, threads));
        results.push_back(criterion_steps_direction(art, out_dir, threads));
    } catch (const std::exception& e) {
        for (int id : {5, 6, 7, 8})
            results.push_back({id, "curriculum-dependent criterion", false,
                               std::string("curriculum exception: ") + e.what()});
    }

    std::sort(results.begin(), results.end(),
              [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
    bool all_pass = true;
    for (const Criterion& c : results) {
        all_pass = all_pass && c.pass;
        std::printf("[%s] criterion %d: %s -- %s\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    c.detail.c_str());
    }
    std::fflush(stdout);
    return all_pass ? 0 : 1;
}
