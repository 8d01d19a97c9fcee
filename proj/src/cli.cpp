#include "gridflow/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gridflow/rng.hpp"

namespace gridflow {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--set", args.overrides,
                    "override a config value, e.g. --set train.batch_size=8");
    cmd->add_option("--seed", args.seed, "override the root seed")
        ->each([&args](const std::string&) { args.seed_given = true; });
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed_given) {
        cfg.seed = args.seed;
        cfg.city.seed = 0;
        cfg.finalize();
    }
    for (const std::string& spec : args.overrides) apply_override(cfg, spec);
    return cfg;
}

// Echo the resolved configuration to stdout and into a run directory named
// from the config hash and a timestamp. Artifacts go to the explicit paths
// in [paths]; the run directory records what produced them.
void announce_run(const RunConfig& cfg, const std::string& command) {
    const std::string text = canonical_config_text(cfg);
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));

    const auto now = std::chrono::system_clock::now();
    const std::time_t now_t = std::chrono::system_clock::to_time_t(now);
    std::tm tm_utc{};
    gmtime_r(&now_t, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_utc);

    const fs::path run_dir = fs::path(cfg.out_dir) / "runs" /
                             (std::string(hash_hex) + "-" + stamp);
    fs::create_directories(run_dir);
    write_text_file("# command: " + command + "\n" + text, run_dir / "config.txt");

    std::cout << "== gridflow " << command << " ==\n";
    std::cout << "seed: " << cfg.seed << "\n";
    std::cout << "run dir: " << run_dir.string() << "\n";
    std::cout << text << "\n";
}

SampleSet make_set(const LoadedScenario& scenario, const std::vector<size_t>& indices,
                   int64_t stride) {
    return SampleSet(scenario.movies, scenario.static_map, indices, stride);
}

RoadMasks load_or_compute_masks(const RunConfig& cfg, const LoadedScenario& scenario) {
    if (fs::exists(cfg.masks_path)) return read_masks(cfg.masks_path);
    MaskAccumulator acc;
    for (size_t idx : scenario.split.train) acc.add((*scenario.movies)[idx]);
    RoadMasks masks = acc.finish();
    fs::create_directories(fs::path(cfg.masks_path).parent_path());
    write_masks(masks, cfg.masks_path);
    return masks;
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

int cmd_generate(const RunConfig& cfg) {
    const Manifest manifest =
        generate_scenario(cfg.city, cfg.days_first_half, cfg.days_second_half, cfg.data_dir);
    std::cout << "wrote " << manifest.entries.size() << " movies to " << cfg.data_dir << "\n";
    return 0;
}

int cmd_mask(const RunConfig& cfg) {
    // Stream the training movies through the accumulator one file at a time.
    const Manifest manifest = read_manifest(fs::path(cfg.data_dir) / kManifestFilename);
    MaskAccumulator acc;
    int64_t used = 0;
    for (const ManifestEntry& entry : manifest.entries) {
        if (entry.regime != Regime::first_half) continue;
        acc.add(read_movie(fs::path(cfg.data_dir) / entry.filename));
        ++used;
    }
    if (used == 0) throw Error("mask: no first-half movies in manifest");
    const RoadMasks masks = acc.finish();
    ensure_parent_dir(cfg.masks_path);
    write_masks(masks, cfg.masks_path);
    int64_t on = 0;
    for (const auto& m : masks.masks) {
        for (uint8_t v : m) on += v;
    }
    std::cout << "masks from " << used << " training movies; " << on
              << " direction-pixels on; wrote " << cfg.masks_path << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, bool two_stage_flag) {
    const LoadedScenario scenario = load_scenario(cfg.data_dir);
    const bool two_stage = two_stage_flag || cfg.train.use_two_stage;
    const SampleSet train_set =
        make_set(scenario, scenario.split.train, cfg.train.train_sample_stride);
    const SampleSet val_set =
        make_set(scenario, scenario.split.validation, cfg.train.finetune_sample_stride);

    ensure_parent_dir(cfg.pretrain_checkpoint);
    ensure_parent_dir(cfg.checkpoint);
    const TrainResult result = train_pipeline(cfg.train, train_set, val_set,
                                              cfg.pretrain_checkpoint, cfg.checkpoint, two_stage);

    fs::create_directories(cfg.report_dir);
    write_text_file(format_loss_curve_csv(result.curve),
                    fs::path(cfg.report_dir) / "loss_curve.csv");
    for (const EpochLoss& e : result.curve) {
        std::cout << e.split << " epoch " << e.epoch << ": mean loss "
                  << std::scientific << e.mean_loss << std::defaultfloat << "\n";
    }
    std::cout << "checkpoint: " << cfg.checkpoint << "\n";
    return 0;
}

int cmd_finetune(const RunConfig& cfg) {
    const LoadedScenario scenario = load_scenario(cfg.data_dir);
    const SampleSet val_set =
        make_set(scenario, scenario.split.validation, cfg.train.finetune_sample_stride);
    ModelParams params = load_checkpoint(cfg.pretrain_checkpoint);
    validate_params(params, cfg.train.arch);
    const TrainResult result = finetune(cfg.train, std::move(params), val_set);
    ensure_parent_dir(cfg.checkpoint);
    save_checkpoint(result.params, cfg.checkpoint);
    fs::create_directories(cfg.report_dir);
    write_text_file(format_loss_curve_csv(result.curve),
                    fs::path(cfg.report_dir) / "finetune_loss_curve.csv");
    std::cout << "fine-tuned checkpoint: " << cfg.checkpoint << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, bool mask_flag) {
    const LoadedScenario scenario = load_scenario(cfg.data_dir);
    const SampleSet test_set =
        make_set(scenario, scenario.split.test, cfg.train.eval_sample_stride);
    ModelParams params = load_checkpoint(cfg.checkpoint);
    validate_params(params, cfg.train.arch);

    const bool use_mask = mask_flag || cfg.train.use_mask;
    RoadMasks masks;
    if (use_mask) masks = load_or_compute_masks(cfg, scenario);
    const EvalReport report =
        evaluate(cfg.train.arch, params, test_set, use_mask ? &masks : nullptr);

    fs::create_directories(cfg.report_dir);
    write_text_file(format_eval_csv(report), fs::path(cfg.report_dir) / "eval.csv");
    write_text_file(format_eval_text(report), fs::path(cfg.report_dir) / "eval.txt");
    std::cout << format_eval_text(report);
    return 0;
}

int cmd_predict(const RunConfig& cfg, bool mask_flag, int64_t day, int64_t t_start) {
    const LoadedScenario scenario = load_scenario(cfg.data_dir);
    ModelParams params = load_checkpoint(cfg.checkpoint);
    validate_params(params, cfg.train.arch);

    const Movie* movie = nullptr;
    if (day < 0) {
        movie = &(*scenario.movies)[scenario.split.test.front()];
    } else {
        for (const Movie& m : *scenario.movies) {
            if (m.day_index == day) movie = &m;
        }
        if (movie == nullptr) throw Error("predict: no movie with day index " +
                                          std::to_string(day));
    }
    const Sample sample = make_sample(*movie, scenario.static_map, t_start);

    const bool use_mask = mask_flag || cfg.train.use_mask;
    RoadMasks masks;
    if (use_mask) masks = load_or_compute_masks(cfg, scenario);
    const Tensor pred =
        predict(cfg.train.arch, params, sample.input, use_mask ? &masks : nullptr);

    // Predictions ship as a 6-frame, 8-channel movie re-quantized to u8.
    Movie out;
    out.city = movie->city;
    out.day_index = movie->day_index;
    out.frame_count = kOutputFrames;
    out.height = movie->height;
    out.width = movie->width;
    out.channel_count = channels::output_count;
    out.values.assign(static_cast<size_t>(pred.numel()), 0);
    const auto p = pred.data();
    const int64_t plane = out.height * out.width;
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        for (int64_t y = 0; y < out.height; ++y) {
            for (int64_t x = 0; x < out.width; ++x) {
                for (int64_t c = 0; c < channels::output_count; ++c) {
                    const double v =
                        p[static_cast<size_t>((k * channels::output_count + c) * plane +
                                              y * out.width + x)];
                    out.at(k, y, x, c) =
                        static_cast<uint8_t>(std::llround(std::clamp(v, 0.0, 1.0) * 255.0));
                }
            }
        }
    }
    fs::create_directories(cfg.report_dir);
    std::ostringstream name;
    name << "prediction_d" << movie->day_index << "_t" << t_start << ".gfmv";
    const fs::path out_path = fs::path(cfg.report_dir) / name.str();
    write_movie(out, out_path);
    std::cout << "prediction: " << out_path.string() << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    const LoadedScenario scenario = load_scenario(cfg.data_dir);
    const SampleSet train_set =
        make_set(scenario, scenario.split.train, cfg.train.train_sample_stride);
    const SampleSet val_set =
        make_set(scenario, scenario.split.validation, cfg.train.finetune_sample_stride);
    const SampleSet test_set =
        make_set(scenario, scenario.split.test, cfg.train.eval_sample_stride);
    const RoadMasks masks = load_or_compute_masks(cfg, scenario);

    ensure_parent_dir(cfg.pretrain_checkpoint);
    ensure_parent_dir(cfg.checkpoint);
    const AblationTable table = run_ablation(cfg.train, train_set, val_set, test_set, masks,
                                             cfg.pretrain_checkpoint, cfg.checkpoint);

    fs::create_directories(cfg.report_dir);
    write_text_file(format_ablation_text(table), fs::path(cfg.report_dir) / "ablation.txt");
    write_text_file(format_ablation_csv(table), fs::path(cfg.report_dir) / "ablation.csv");
    write_text_file(format_loss_curve_csv(table.curve),
                    fs::path(cfg.report_dir) / "loss_curve.csv");
    std::cout << format_ablation_text(table);
    return 0;
}

int cmd_report(const RunConfig& cfg, bool mask_flag, int64_t day, int64_t t_start) {
    const LoadedScenario scenario = load_scenario(cfg.data_dir);
    ModelParams params = load_checkpoint(cfg.checkpoint);
    validate_params(params, cfg.train.arch);

    const Movie* movie = nullptr;
    if (day < 0) {
        movie = &(*scenario.movies)[scenario.split.test.front()];
    } else {
        for (const Movie& m : *scenario.movies) {
            if (m.day_index == day) movie = &m;
        }
        if (movie == nullptr) throw Error("report: no movie with day index " +
                                          std::to_string(day));
    }
    const Sample sample = make_sample(*movie, scenario.static_map, t_start);

    const bool use_mask = mask_flag || cfg.train.use_mask;
    RoadMasks masks;
    if (use_mask) masks = load_or_compute_masks(cfg, scenario);
    const auto written = emit_visual_report(cfg.train.arch, params, sample,
                                            use_mask ? &masks : nullptr, cfg.report_dir);
    std::cout << "wrote " << written.size() << " heatmaps to " << cfg.report_dir << "\n";
    return 0;
}

}  // namespace

LoadedScenario load_scenario(const std::string& data_dir) {
    const Manifest manifest = read_manifest(fs::path(data_dir) / kManifestFilename);
    if (manifest.entries.empty()) throw Error("scenario manifest lists no movies");

    LoadedScenario scenario;
    scenario.movies = std::make_shared<std::vector<Movie>>();
    scenario.movies->reserve(manifest.entries.size());
    for (const ManifestEntry& entry : manifest.entries) {
        scenario.movies->push_back(read_movie(fs::path(data_dir) / entry.filename));
        scenario.regimes.push_back(entry.regime);
    }
    const std::string static_name = manifest.param("static_map").empty()
                                        ? std::string(kStaticMapFilename)
                                        : manifest.param("static_map");
    scenario.static_map = read_static_map(fs::path(data_dir) / static_name);
    scenario.split = split_dataset(*scenario.movies, scenario.regimes);
    return scenario;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"gridflow: desk-scale traffic frame forecasting pipeline"};
    app.require_subcommand(1);

    CommonArgs generate_args, mask_args, train_args, finetune_args, evaluate_args, predict_args,
        ablate_args, report_args;
    bool train_two_stage = false;
    bool evaluate_mask = false, predict_mask = false, report_mask = false;
    int64_t predict_day = -1, predict_t = 0;
    int64_t report_day = -1, report_t = 0;

    CLI::App* generate = app.add_subcommand("generate", "generate a synthetic scenario");
    add_common(generate, generate_args);
    CLI::App* mask = app.add_subcommand("mask", "compute road masks from training movies");
    add_common(mask, mask_args);
    CLI::App* train = app.add_subcommand("train", "pretrain (optionally fine-tune) the model");
    add_common(train, train_args);
    train->add_flag("--two-stage", train_two_stage, "fine-tune on validation data after pretraining");
    CLI::App* finetune_cmd = app.add_subcommand("finetune", "fine-tune a pretrained checkpoint");
    add_common(finetune_cmd, finetune_args);
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    add_common(evaluate_cmd, evaluate_args);
    evaluate_cmd->add_flag("--mask", evaluate_mask, "apply road masks to predictions");
    CLI::App* predict = app.add_subcommand("predict", "write one prediction as a movie file");
    add_common(predict, predict_args);
    predict->add_flag("--mask", predict_mask, "apply road masks to predictions");
    predict->add_option("--day", predict_day, "day index (default: first test movie)");
    predict->add_option("--t", predict_t, "window start frame");
    CLI::App* ablate = app.add_subcommand("ablate", "run the four-row ablation study");
    add_common(ablate, ablate_args);
    CLI::App* report = app.add_subcommand("report", "emit ground-truth/prediction heatmaps");
    add_common(report, report_args);
    report->add_flag("--mask", report_mask, "apply road masks to predictions");
    report->add_option("--day", report_day, "day index (default: first test movie)");
    report->add_option("--t", report_t, "window start frame");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (generate->parsed()) {
            const RunConfig cfg = resolve_config(generate_args);
            announce_run(cfg, "generate");
            return cmd_generate(cfg);
        }
        if (mask->parsed()) {
            const RunConfig cfg = resolve_config(mask_args);
            announce_run(cfg, "mask");
            return cmd_mask(cfg);
        }
        if (train->parsed()) {
            const RunConfig cfg = resolve_config(train_args);
            announce_run(cfg, "train");
            return cmd_train(cfg, train_two_stage);
        }
        if (finetune_cmd->parsed()) {
            const RunConfig cfg = resolve_config(finetune_args);
            announce_run(cfg, "finetune");
            return cmd_finetune(cfg);
        }
        if (evaluate_cmd->parsed()) {
            const RunConfig cfg = resolve_config(evaluate_args);
            announce_run(cfg, "evaluate");
            return cmd_evaluate(cfg, evaluate_mask);
        }
        if (predict->parsed()) {
            const RunConfig cfg = resolve_config(predict_args);
            announce_run(cfg, "predict");
            return cmd_predict(cfg, predict_mask, predict_day, predict_t);
        }
        if (ablate->parsed()) {
            const RunConfig cfg = resolve_config(ablate_args);
            announce_run(cfg, "ablate");
            return cmd_ablate(cfg);
        }
        if (report->parsed()) {
            const RunConfig cfg = resolve_config(report_args);
            announce_run(cfg, "report");
            return cmd_report(cfg, report_mask, report_day, report_t);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.push_back("gridflow");
    for (const std::string& a : args) full.push_back(a);
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& a : full) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace gridflow
