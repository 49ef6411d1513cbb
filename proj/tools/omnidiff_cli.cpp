// Command-line driver: synthetic data generation, stage training, checkpoint
// merging, evaluation, step sweeps, and single-prompt generation demos.
//
// stdout carries data, stderr carries diagnostics; every command exits
// nonzero on error and records its resolved configuration next to outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "omnidiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace omnidiff;
using nlohmann::json;

namespace {

std::string resolve_out_dir(const std::string& out_flag, const std::string& command) {
    if (!out_flag.empty()) return out_flag;
    if (const char* root = std::getenv("OMNIDIFF_OUT_ROOT"))
        return (fs::path(root) / command).string();
    throw CLI::ValidationError("--out", "no output directory (set --out or OMNIDIFF_OUT_ROOT)");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

void record_run_config(const fs::path& dir, const json& resolved) {
    write_text(dir / "resolved.json", resolved.dump(2) + "\n");
}

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    f >> j;
    return j;
}

std::vector<TemplateFamily> parse_family_list(const std::string& csv) {
    std::vector<TemplateFamily> out;
    std::string item;
    std::stringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        auto f = family_from_name(item);
        if (!f) {
            std::string valid;
            for (TemplateFamily fam : all_families()) {
                if (!valid.empty()) valid += ", ";
                valid += family_name(fam);
            }
            throw CLI::ValidationError("--families", "unknown family '" + item +
                                                         "' (valid: " + valid + ")");
        }
        out.push_back(*f);
    }
    return out;
}

Dataset load_dataset_dir(const std::string& dir, DataConfig& cfg_out) {
    cfg_out = data_config_from_json(load_json_file((fs::path(dir) / "dataset_config.json").string()));
    Dataset data;
    for (TemplateFamily f : cfg_out.families) {
        const fs::path path = fs::path(dir) / (std::string(family_name(f)) + ".jsonl");
        data[f] = read_jsonl(path.string());
    }
    return data;
}

std::map<TemplateFamily, DecodeConfig> load_decode_configs(const json& j) {
    std::map<TemplateFamily, DecodeConfig> out;
    for (const auto& [name, cfg] : j.items()) {
        auto f = family_from_name(name);
        if (!f) throw std::runtime_error("unknown family in decode config: " + name);
        out[*f] = decode_config_from_json(cfg);
    }
    return out;
}

std::string grid_to_text(const GridImage& img) {
    std::string out;
    for (std::size_t r = 0; r < img.side; ++r) {
        for (std::size_t c = 0; c < img.side; ++c) {
            if (c) out += " ";
            out += std::to_string(img.at(r, c));
        }
        out += "\n";
    }
    return out;
}

// --- subcommand implementations ---------------------------------------------

int cmd_gen_data(const std::string& out_flag, std::uint64_t seed, const std::string& families_csv,
                 std::size_t grid_side, std::size_t count, const std::string& config_path,
                 bool force) {
    DataConfig cfg;
    if (!config_path.empty()) {
        cfg = data_config_from_json(load_json_file(config_path));
    } else {
        cfg.families = all_families();
        cfg.image_scene.side = grid_side;
        cfg.records_per_family = count;
    }
    if (!families_csv.empty()) cfg.families = parse_family_list(families_csv);
    cfg.seed = seed;

    const fs::path dir = resolve_out_dir(out_flag, "gen-data");
    if (fs::exists(dir / "dataset_config.json") && !force)
        throw std::runtime_error("dataset already exists at " + dir.string() +
                                 " (use --force to overwrite)");
    fs::create_directories(dir);

    Dataset data = generate_dataset(cfg);
    for (const auto& [family, records] : data)
        write_jsonl(records, (dir / (std::string(family_name(family)) + ".jsonl")).string());
    write_text(dir / "dataset_config.json", data_config_to_json(cfg).dump(2) + "\n");
    record_run_config(dir, {{"command", "gen-data"}, {"config", data_config_to_json(cfg)}});
    std::cerr << "wrote " << cfg.families.size() << " family file(s) to " << dir << "\n";
    return 0;
}

int cmd_init_ckpt(std::size_t dim, std::size_t layers, std::size_t heads, std::size_t max_len,
                  std::size_t text, std::size_t vision, std::size_t speech, std::uint64_t seed,
                  const std::string& out_flag) {
    ModelConfig cfg;
    cfg.dim = dim;
    cfg.layers = layers;
    cfg.heads = heads;
    cfg.max_len = max_len;
    cfg.vocab = build_layout(text, vision, speech, standard_special_names());
    cfg.seed = seed;
    Checkpoint ckpt = checkpoint_from_params(init_params<float>(cfg), {0, 0, seed, "init"});
    const fs::path dir = resolve_out_dir(out_flag, "init-ckpt");
    fs::create_directories(dir);
    save_checkpoint(ckpt, (dir / "checkpoint.bin").string());
    record_run_config(dir, {{"command", "init-ckpt"}, {"model", model_config_to_json(cfg)}});
    std::cerr << "fresh checkpoint written to " << (dir / "checkpoint.bin") << "\n";
    return 0;
}

int cmd_train(int stage, const std::string& init_path, const std::string& config_path,
              const std::string& data_dir, const std::string& out_flag,
              std::size_t extend_speech, std::uint64_t extend_seed, unsigned threads) {
    StageConfig cfg = stage_config_from_json(load_json_file(config_path));
    if (stage != 0 && cfg.stage != stage)
        throw std::runtime_error("--stage disagrees with the config file");
    DataConfig data_cfg;
    Dataset data = load_dataset_dir(data_dir, data_cfg);

    Checkpoint init = load_checkpoint(init_path);
    if (extend_speech > 0) init = vocab_extension_init(init, extend_speech, extend_seed);

    const fs::path dir = resolve_out_dir(out_flag, "train");
    fs::create_directories(dir);
    RunResult result = run_stage(cfg, init, data, data_cfg, threads);

    save_checkpoint(result.checkpoint, (dir / "checkpoint.bin").string());
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i)
        csv += std::to_string(i) + "," + std::to_string(result.losses[i]) + "\n";
    write_text(dir / "loss.csv", csv);
    record_run_config(dir, {{"command", "train"},
                            {"init", init_path},
                            {"data", data_dir},
                            {"extend_speech", extend_speech},
                            {"extend_seed", extend_seed},
                            {"stage_config", stage_config_to_json(cfg)}});
    std::cerr << "checkpoint written to " << (dir / "checkpoint.bin") << "\n";
    return 0;
}

int cmd_merge(const std::string& backbone_path, const std::string& stage1_path, double alpha,
              const std::string& strategy_name, const std::string& out_flag) {
    auto strategy = merge_strategy_from_name(strategy_name);
    if (!strategy)
        throw CLI::ValidationError("--strategy", "unknown strategy '" + strategy_name +
                                                     "' (shared, stage1-only, modality-disentangled)");
    if (alpha < 0.0 || alpha > 1.0)
        throw CLI::ValidationError("--alpha", "alpha must lie in [0, 1]");
    Checkpoint backbone = load_checkpoint(backbone_path);
    Checkpoint stage1 = load_checkpoint(stage1_path);
    Checkpoint merged = merge_checkpoints(backbone, stage1, alpha, *strategy);

    const fs::path dir = resolve_out_dir(out_flag, "merge");
    fs::create_directories(dir);
    save_checkpoint(merged, (dir / "checkpoint.bin").string());
    record_run_config(dir, {{"command", "merge"},
                            {"backbone", backbone_path},
                            {"stage1", stage1_path},
                            {"alpha", alpha},
                            {"strategy", strategy_name}});
    std::cerr << "merged checkpoint written to " << (dir / "checkpoint.bin") << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& suite_dir,
             const std::string& eval_config_path, const std::string& tasks_csv,
             std::size_t steps, std::size_t block, double cfg_scale, double temperature,
             std::uint64_t seed, std::size_t max_samples, const std::string& out_flag,
             unsigned threads) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    DataConfig data_cfg;
    Dataset suite = load_dataset_dir(suite_dir, data_cfg);

    json eval_json = load_json_file(eval_config_path);
    auto decode_cfgs = load_decode_configs(eval_json.at("decode"));
    EvalOptions options;
    options.caps = capacities_from_json(eval_json.at("capacities"));
    options.max_samples = max_samples ? max_samples : eval_json.value("max_samples", 200);
    options.seed = seed;

    if (!tasks_csv.empty()) {
        std::map<TemplateFamily, DecodeConfig> filtered;
        for (TemplateFamily f : parse_family_list(tasks_csv)) {
            auto it = decode_cfgs.find(f);
            if (it == decode_cfgs.end())
                throw std::runtime_error(std::string("no decode config for task ") +
                                         family_name(f));
            filtered.insert(*it);
        }
        decode_cfgs = std::move(filtered);
    }
    if (cfg_scale >= 0.0) {
        for (auto& [f, cfg] : decode_cfgs) {
            if (!is_image_generation(f))
                throw CLI::ValidationError("--cfg-scale",
                                           "guidance applies to image tasks only; restrict --tasks");
            cfg.cfg_scale = cfg_scale;
        }
    }
    for (auto& [f, cfg] : decode_cfgs) {
        if (steps) cfg.steps = steps;
        if (block) cfg.block_length = block;
        if (temperature >= 0.0) cfg.temperature = temperature;
    }

    EvalReport report = evaluate(ckpt, suite, data_cfg, decode_cfgs, options, threads);
    const fs::path dir = resolve_out_dir(out_flag, "eval");
    fs::create_directories(dir);
    write_text(dir / "report.jsonl", report.to_jsonl());
    json resolved = {{"command", "eval"},  {"ckpt", ckpt_path},   {"suite", suite_dir},
                     {"seed", seed},       {"max_samples", options.max_samples},
                     {"capacities", capacities_to_json(options.caps)}};
    for (const auto& [f, cfg] : decode_cfgs)
        resolved["decode"][family_name(f)] = decode_config_to_json(cfg);
    record_run_config(dir, resolved);
    std::cout << report.to_jsonl();
    return 0;
}

int cmd_sweep(const std::string& ckpt_path, const std::string& suite_dir,
              const std::string& eval_config_path, const std::string& task_name,
              const std::string& steps_csv, std::uint64_t seed, std::size_t max_samples,
              const std::string& out_flag, unsigned threads) {
    auto family = family_from_name(task_name);
    if (!family) throw CLI::ValidationError("--task", "unknown task '" + task_name + "'");

    std::vector<std::size_t> steps_list;
    {
        std::set<std::size_t> seen;  // duplicates collapse, order preserved
        std::stringstream ss(steps_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            if (seen.insert(std::stoul(item)).second) steps_list.push_back(std::stoul(item));
    }
    if (steps_list.empty()) throw CLI::ValidationError("--steps", "empty step list");

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    DataConfig data_cfg;
    Dataset suite = load_dataset_dir(suite_dir, data_cfg);
    json eval_json = load_json_file(eval_config_path);
    auto decode_cfgs = load_decode_configs(eval_json.at("decode"));
    auto it = decode_cfgs.find(*family);
    if (it == decode_cfgs.end())
        throw std::runtime_error("no decode config for task " + task_name);

    EvalOptions options;
    options.caps = capacities_from_json(eval_json.at("capacities"));
    options.max_samples = max_samples ? max_samples : eval_json.value("max_samples", 200);
    options.seed = seed;

    const std::string metric = is_image_generation(*family) ? "scene_match" : "exact_match";
    std::string csv = "steps,metric\n";
    std::vector<double> scores;
    for (std::size_t s : steps_list) {
        DecodeConfig cfg = it->second;
        cfg.steps = s;
        std::map<TemplateFamily, DecodeConfig> one{{*family, cfg}};
        EvalReport rep = evaluate(ckpt, suite, data_cfg, one, options, threads);
        const double v = rep.value(task_name, metric);
        scores.push_back(v);
        csv += std::to_string(s) + "," + std::to_string(v) + "\n";
    }

    const fs::path dir = resolve_out_dir(out_flag, "sweep");
    fs::create_directories(dir);
    write_text(dir / "sweep.csv", csv);
    record_run_config(dir, {{"command", "sweep"},
                            {"ckpt", ckpt_path},
                            {"suite", suite_dir},
                            {"task", task_name},
                            {"metric", metric},
                            {"seed", seed},
                            {"steps", steps_list}});

    // trend summary derived from the sweep itself
    std::size_t best = 0;
    bool nondecreasing = true;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] >= scores[best]) best = i;
        if (i && scores[i] + 1e-12 < scores[i - 1]) nondecreasing = false;
    }
    std::cout << csv;
    std::cout << "# best at steps=" << steps_list[best] << " (" << metric << "=" << scores[best]
              << "), trend " << (nondecreasing ? "non-decreasing" : "non-monotone") << ", span "
              << scores.back() - scores.front() << " from steps=" << steps_list.front() << " to "
              << steps_list.back() << "\n";
    return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& family_name_str,
                 const std::string& prompt_text, std::uint64_t scene_seed, std::size_t steps,
                 std::size_t block, double temperature, double cfg_scale, std::uint64_t seed,
                 std::size_t grid_side, const std::string& eval_config_path) {
    auto family = family_from_name(family_name_str);
    if (!family) {
        std::string valid;
        for (TemplateFamily f : all_families()) {
            if (!valid.empty()) valid += ", ";
            valid += family_name(f);
        }
        throw CLI::ValidationError("--family", "unknown family '" + family_name_str +
                                                   "' (valid: " + valid + ")");
    }
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const VocabLayout& layout = ckpt.layout;

    json eval_json = load_json_file(eval_config_path);
    TaskCapacities caps = capacities_from_json(eval_json.at("capacities"));
    auto decode_cfgs = load_decode_configs(eval_json.at("decode"));
    DecodeConfig decode;
    if (auto it = decode_cfgs.find(*family); it != decode_cfgs.end()) decode = it->second;
    if (steps) decode.steps = steps;
    if (block) decode.block_length = block;
    if (temperature >= 0.0) decode.temperature = temperature;
    if (cfg_scale >= 0.0) decode.cfg_scale = cfg_scale;
    decode.seed = seed;

    SceneConfig scene_cfg;
    scene_cfg.side = grid_side;
    Rng scene_rng(scene_seed);

    Record rec;
    rec.family = *family;
    switch (*family) {
        case TemplateFamily::TextChat:
        case TemplateFamily::ThinkingMode:
            rec.prompt = prompt_text;
            rec.response = "";
            break;
        case TemplateFamily::SpeechToText:
        case TemplateFamily::TextToSpeech:
            rec.text = prompt_text;
            break;
        case TemplateFamily::TextToImage: {
            // prompt is a caption; parse it by sampling is not possible, so
            // the caption becomes the conditioning text directly
            rec.scene = sample_scene(scene_rng, scene_cfg);
            break;
        }
        case TemplateFamily::ImageToText:
        case TemplateFamily::VideoToText:
            rec.scene = sample_scene(scene_rng, scene_cfg);
            rec.frames = 2;
            break;
        case TemplateFamily::ImageToImage: {
            rec.scene = sample_scene(scene_rng, scene_cfg);
            EditPair pair = make_edit_pair(scene_rng, rec.scene, scene_cfg);
            rec.instruction = pair.instruction;
            rec.target_scene = pair.target_scene;
            break;
        }
    }

    // build conditioning; for t2i an explicit prompt overrides the sampled caption
    AssembledSequence truth;
    if (*family == TemplateFamily::TextToImage && !prompt_text.empty()) {
        TemplateParts parts;
        parts.prompt = tokenize_text(layout, prompt_text);
        parts.target_tokens.assign(scene_cfg.side * scene_cfg.side, vision_token(layout, 0));
        truth = assemble(layout, *family, parts, 3, parts.target_tokens.size());
    } else {
        truth = assemble_record(layout, rec, 3, caps, scene_cfg, scene_cfg);
    }
    AssembledSequence prompt = make_generation_prompt(layout, truth);
    ModelParams<float> params = params_from_checkpoint(ckpt);
    GenerateResult gen = generate(params, prompt, decode);

    std::vector<TokenId> span(gen.tokens.begin() + static_cast<std::ptrdiff_t>(truth.target_begin),
                              gen.tokens.begin() + static_cast<std::ptrdiff_t>(truth.target_end));
    switch (*family) {
        case TemplateFamily::TextToImage:
        case TemplateFamily::ImageToImage: {
            GridImage img = detokenize_image(layout, span, scene_cfg.side);
            std::cout << grid_to_text(img);
            break;
        }
        case TemplateFamily::TextToSpeech: {
            std::vector<TokenId> trunc = truncate_at_eos(layout, span);
            std::cout << "units:";
            for (TokenId id : trunc) std::cout << " " << id;
            std::cout << "\ntext: " << tolerant_speech_text(layout, trunc) << "\n";
            break;
        }
        default: {
            std::cout << tolerant_text(layout, truncate_at_eos(layout, span)) << "\n";
            break;
        }
    }
    std::cerr << "forward calls: " << gen.forward_calls << "\n";
    return 0;
}

int cmd_run_curriculum(const std::string& config_path, const std::string& out_flag,
                       unsigned threads) {
    CurriculumConfig cfg = curriculum_config_from_json(load_json_file(config_path));
    const fs::path dir = resolve_out_dir(out_flag, "curriculum");
    fs::create_directories(dir);

    CurriculumResult result = run_curriculum(cfg, threads, [](const std::string& msg) {
        std::cerr << msg << "\n";
    });

    save_checkpoint(result.backbone, (dir / "backbone.bin").string());
    save_checkpoint(result.stage1, (dir / "stage1.bin").string());
    save_checkpoint(result.merged, (dir / "merged.bin").string());
    save_checkpoint(result.stage2, (dir / "stage2.bin").string());
    save_checkpoint(result.stage3, (dir / "stage3.bin").string());
    auto dump_losses = [&](const std::vector<double>& losses, const char* name) {
        std::string csv = "step,loss\n";
        for (std::size_t i = 0; i < losses.size(); ++i)
            csv += std::to_string(i) + "," + std::to_string(losses[i]) + "\n";
        write_text(dir / name, csv);
    };
    dump_losses(result.losses_backbone, "loss_backbone.csv");
    dump_losses(result.losses_stage1, "loss_stage1.csv");
    dump_losses(result.losses_stage2, "loss_stage2.csv");
    dump_losses(result.losses_stage3, "loss_stage3.csv");
    record_run_config(dir, {{"command", "run-curriculum"},
                            {"config", curriculum_config_to_json(cfg)}});
    std::cerr << "curriculum checkpoints written to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale unified masked-diffusion multimodal modeling"};
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate synthetic dataset files");
    std::string gen_out, gen_families, gen_config;
    std::uint64_t gen_seed = 0;
    std::size_t gen_side = 3, gen_count = 2000;
    bool gen_force = false;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", gen_seed, "generation seed")->required();
    gen->add_option("--families", gen_families, "comma-separated families (default: all)");
    gen->add_option("--grid-side", gen_side, "image grid side");
    gen->add_option("--count", gen_count, "records per family");
    gen->add_option("--config", gen_config, "data config JSON (overrides flags)");
    gen->add_flag("--force", gen_force, "overwrite an existing dataset");

    // init-ckpt
    auto* init_cmd = app.add_subcommand("init-ckpt", "write a fresh random checkpoint");
    std::size_t ic_dim = 64, ic_layers = 3, ic_heads = 4, ic_maxlen = 80;
    std::size_t ic_text = 64, ic_vision = 16, ic_speech = 0;
    std::uint64_t ic_seed = 1;
    std::string ic_out;
    init_cmd->add_option("--dim", ic_dim, "model width");
    init_cmd->add_option("--layers", ic_layers, "transformer blocks");
    init_cmd->add_option("--heads", ic_heads, "attention heads");
    init_cmd->add_option("--max-len", ic_maxlen, "maximum sequence length");
    init_cmd->add_option("--text", ic_text, "text vocabulary size");
    init_cmd->add_option("--vision", ic_vision, "vision vocabulary size");
    init_cmd->add_option("--speech", ic_speech, "speech vocabulary size");
    init_cmd->add_option("--seed", ic_seed, "init seed");
    init_cmd->add_option("--out", ic_out, "output directory");

    // train
    auto* train = app.add_subcommand("train", "run one training stage");
    std::string train_init, train_config, train_data, train_out;
    int train_stage = 0;
    std::size_t train_extend = 0;
    std::uint64_t train_extend_seed = 7;
    train->add_option("--stage", train_stage, "expected stage (cross-checked with config)");
    train->add_option("--init", train_init, "initial checkpoint")->required();
    train->add_option("--config", train_config, "stage config JSON")->required();
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory");
    train->add_option("--extend-speech", train_extend,
                      "extend the vocabulary by N speech units before training");
    train->add_option("--extend-seed", train_extend_seed, "seed for fresh speech rows");

    // merge
    auto* merge_cmd = app.add_subcommand("merge", "merge two checkpoints");
    std::string merge_backbone, merge_stage1, merge_out, merge_strategy = "modality-disentangled";
    double merge_alpha = 0.6;
    merge_cmd->add_option("--backbone", merge_backbone, "backbone checkpoint (V0)")->required();
    merge_cmd->add_option("--stage1", merge_stage1, "stage-1 checkpoint (V1)")->required();
    merge_cmd->add_option("--alpha", merge_alpha, "weight on the backbone (default 0.6)");
    merge_cmd->add_option("--strategy", merge_strategy,
                          "shared | stage1-only | modality-disentangled");
    merge_cmd->add_option("--out", merge_out, "output directory");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a task suite");
    std::string eval_ckpt, eval_suite, eval_config, eval_tasks, eval_out;
    std::size_t eval_steps = 0, eval_block = 0, eval_max = 0;
    double eval_cfg_scale = -1.0, eval_temperature = -1.0;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--suite", eval_suite, "held-out dataset directory")->required();
    eval_cmd->add_option("--eval-config", eval_config, "eval config JSON")->required();
    eval_cmd->add_option("--tasks", eval_tasks, "comma-separated task filter");
    eval_cmd->add_option("--steps", eval_steps, "override diffusion steps");
    eval_cmd->add_option("--block", eval_block, "override block length");
    eval_cmd->add_option("--cfg-scale", eval_cfg_scale, "guidance scale (image tasks only)");
    eval_cmd->add_option("--temperature", eval_temperature, "override sampling temperature");
    eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
    eval_cmd->add_option("--max-samples", eval_max, "samples per task");
    eval_cmd->add_option("--out", eval_out, "output directory");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "sweep diffusion steps on one task");
    std::string sweep_ckpt, sweep_suite, sweep_config, sweep_task, sweep_steps, sweep_out;
    std::uint64_t sweep_seed = 0;
    std::size_t sweep_max = 0;
    sweep_cmd->add_option("--ckpt", sweep_ckpt, "checkpoint path")->required();
    sweep_cmd->add_option("--suite", sweep_suite, "held-out dataset directory")->required();
    sweep_cmd->add_option("--eval-config", sweep_config, "eval config JSON")->required();
    sweep_cmd->add_option("--task", sweep_task, "task to sweep")->required();
    sweep_cmd->add_option("--steps", sweep_steps, "comma-separated step counts")->required();
    sweep_cmd->add_option("--seed", sweep_seed, "evaluation seed");
    sweep_cmd->add_option("--max-samples", sweep_max, "samples per point");
    sweep_cmd->add_option("--out", sweep_out, "output directory");

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "single-prompt generation demo");
    std::string g_ckpt, g_family, g_prompt, g_config;
    std::uint64_t g_scene_seed = 1, g_seed = 0;
    std::size_t g_steps = 0, g_block = 0, g_side = 3;
    double g_temperature = -1.0, g_cfg = -1.0;
    gen_cmd->add_option("--ckpt", g_ckpt, "checkpoint path")->required();
    gen_cmd->add_option("--family", g_family, "task family")->required();
    gen_cmd->add_option("--prompt", g_prompt, "prompt text (chat/tts/asr/t2i)");
    gen_cmd->add_option("--scene-seed", g_scene_seed, "seed for sampled input scenes");
    gen_cmd->add_option("--steps", g_steps, "diffusion steps");
    gen_cmd->add_option("--block", g_block, "block length");
    gen_cmd->add_option("--temperature", g_temperature, "sampling temperature");
    gen_cmd->add_option("--cfg-scale", g_cfg, "guidance scale (image families)");
    gen_cmd->add_option("--seed", g_seed, "decode seed");
    gen_cmd->add_option("--grid-side", g_side, "grid side for image demos");
    gen_cmd->add_option("--eval-config", g_config, "eval config JSON (capacities/decoding)")
        ->required();

    // run-curriculum
    auto* cur_cmd = app.add_subcommand("run-curriculum", "run the full three-stage curriculum");
    std::string cur_config, cur_out;
    cur_cmd->add_option("--config", cur_config, "curriculum config JSON")->required();
    cur_cmd->add_option("--out", cur_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_out, gen_seed, gen_families, gen_side, gen_count, gen_config,
                                gen_force);
        if (init_cmd->parsed())
            return cmd_init_ckpt(ic_dim, ic_layers, ic_heads, ic_maxlen, ic_text, ic_vision,
                                 ic_speech, ic_seed, ic_out);
        if (train->parsed())
            return cmd_train(train_stage, train_init, train_config, train_data, train_out,
                             train_extend, train_extend_seed, threads);
        if (merge_cmd->parsed())
            return cmd_merge(merge_backbone, merge_stage1, merge_alpha, merge_strategy, merge_out);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_suite, eval_config, eval_tasks, eval_steps, eval_block,
                            eval_cfg_scale, eval_temperature, eval_seed, eval_max, eval_out,
                            threads);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_ckpt, sweep_suite, sweep_config, sweep_task, sweep_steps,
                             sweep_seed, sweep_max, sweep_out, threads);
        if (gen_cmd->parsed())
            return cmd_generate(g_ckpt, g_family, g_prompt, g_scene_seed, g_steps, g_block,
                                g_temperature, g_cfg, g_seed, g_side, g_config);
        if (cur_cmd->parsed()) return cmd_run_curriculum(cur_config, cur_out, threads);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
