// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances and profiles are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gridflow/cli.hpp"
#include "gridflow/grad_check.hpp"
#include "gridflow/train.hpp"
#include "testutil.hpp"

using namespace gridflow;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw CheckFailure(msg);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

// ---- criterion 1: gradient correctness --------------------------------------

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();

    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const int64_t h = 2 * rng.uniform_int(2, 4);
        const int64_t w = 2 * rng.uniform_int(2, 4);
        const int64_t ci = rng.uniform_int(1, 3);
        const int64_t co = rng.uniform_int(1, 3);

        Tensor x = random_tensor({1, ci, h, w}, rng, true);
        Tensor wt = random_tensor({co, ci, 3, 3}, rng, true);
        Tensor b = random_tensor({co}, rng, true);
        auto conv_fn = [](const std::vector<Tensor>& in) {
            return sum_all(conv2d(in[0], in[1], in[2], 1, 1));
        };
        require(grad_check(conv_fn, {x, wt, b}, 1e-4).pass, "conv2d gradient check failed");

        Tensor tw = random_tensor({ci, co, 2, 2}, rng, true);
        Tensor tb = random_tensor({co}, rng, true);
        auto tconv_fn = [](const std::vector<Tensor>& in) {
            return sum_all(transpose_conv2d(in[0], in[1], in[2], 2));
        };
        require(grad_check(tconv_fn, {x, tw, tb}, 1e-4).pass,
                "transpose_conv2d gradient check failed");

        auto pool_fn = [](const std::vector<Tensor>& in) { return sum_all(avg_pool2(in[0])); };
        require(grad_check(pool_fn, {x}, 1e-4).pass, "avg_pool2 gradient check failed");

        Tensor other = random_tensor({1, 2, h, w}, rng, true);
        Tensor target = random_tensor({1, ci + 2, h, w}, rng);
        auto concat_fn = [target](const std::vector<Tensor>& in) {
            return mse_loss(concat_channels(in[0], in[1]), target);
        };
        require(grad_check(concat_fn, {x, other}, 1e-4).pass,
                "concat_channels gradient check failed");

        Tensor shifted = random_tensor({3, 4}, rng, true);
        for (double& v : shifted.mutable_data()) v += (v >= 0.0 ? 0.5 : -0.5);
        auto relu_fn = [](const std::vector<Tensor>& in) { return sum_all(relu(in[0])); };
        require(grad_check(relu_fn, {shifted}, 1e-4).pass, "relu gradient check failed");

        Tensor pred = random_tensor({2, 5}, rng, true);
        Tensor mse_target = random_tensor({2, 5}, rng);
        auto mse_fn = [mse_target](const std::vector<Tensor>& in) {
            return mse_loss(in[0], mse_target);
        };
        require(grad_check(mse_fn, {pred}, 1e-4).pass, "mse_loss gradient check failed");
    }

    // Miniature end-to-end model: depth 2 on an 8x8 grid at 1e-3.
    ArchConfig cfg;
    cfg.depth = 2;
    cfg.growth = 3;
    cfg.base_channels = 3;
    cfg.in_channels = 3;
    cfg.out_channels = 8;
    cfg.input_height = 8;
    cfg.input_width = 8;
    ModelParams params = build_model(cfg, 99);
    Rng rng(123);
    Tensor x = random_tensor({1, cfg.in_channels, 8, 8}, rng);
    Tensor y = Tensor::zeros({1, cfg.out_channels, 8, 8});
    for (double& v : y.mutable_data()) v = rng.uniform01();
    auto fn = [&](const std::vector<Tensor>& in) {
        ModelParams probe;
        for (size_t i = 0; i < in.size(); ++i) {
            probe.items.push_back({params.items[i].name, in[i]});
        }
        return mse_loss(forward(cfg, probe, x), y);
    };
    const auto report = grad_check(fn, params.tensors(), 1e-3);
    require(report.pass, "end-to-end gradient check failed, max rel err " +
                             fmt(report.max_rel_err));

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(elapsed < 60.0, "gradient checks took " + fmt(elapsed) + "s, budget is 60s");
    std::printf("        per-op < 1e-4, end-to-end max rel err %s < 1e-3, %.1fs\n",
                fmt(report.max_rel_err).c_str(), elapsed);
}

// ---- criterion 2: architecture conformance ----------------------------------

void criterion_architecture() {
    ArchConfig cfg;  // defaults: depth 8, growth 16, 128x128
    const auto census = parameter_census(cfg);

    int64_t block_convs = 0, tconvs = 0, bottleneck = 0, head = 0;
    for (const auto& [name, shape] : census) {
        if (name.find(".weight") == std::string::npos) continue;
        if (name.rfind("block", 0) == 0) ++block_convs;
        else if (name.rfind("tconv", 0) == 0) ++tconvs;
        else if (name.rfind("bottleneck", 0) == 0) ++bottleneck;
        else if (name.rfind("head", 0) == 0) ++head;
    }
    require(block_convs == 32, "expected 8 dense blocks of 4 convs, found " +
                                   std::to_string(block_convs));
    require(tconvs == 7, "expected 7 transpose convolutions");
    require(bottleneck == 1, "expected 1 bottleneck convolution");
    require(head == 1, "expected 1 output head");

    // Shape chain on a real forward pass.
    ModelParams params = build_model(cfg, 7);
    Rng rng(8);
    Tensor x = Tensor::zeros({1, cfg.in_channels, 128, 128});
    for (double& v : x.mutable_data()) v = rng.uniform01();

    std::vector<std::pair<std::string, Shape>> stages;
    Tensor out = forward(cfg, params, x, [&](const std::string& s, const Shape& sh) {
        stages.emplace_back(s, sh);
    });
    require(out.shape() == Shape{1, 48, 128, 128}, "output shape mismatch");

    const auto stage_shape = [&](const std::string& name) -> const Shape& {
        for (const auto& [s, sh] : stages) {
            if (s == name) return sh;
        }
        throw CheckFailure("missing forward stage: " + name);
    };
    for (int64_t b = 0; b < 8; ++b) {
        const int64_t res = 128 >> b;
        require(stage_shape("block" + std::to_string(b)) ==
                    Shape{1, cfg.block_width(b), res, res},
                "block " + std::to_string(b) + " resolution mismatch");
    }
    require(stage_shape("bottleneck") == Shape{1, 16, 1, 1}, "bottleneck resolution mismatch");
    for (int64_t t = 0; t < 7; ++t) {
        // Skip from block 7-t joins at the same resolution before tconv t.
        const int64_t res = 128 >> (7 - t);
        const int64_t skip_width = cfg.block_width(7 - t);
        require(stage_shape("concat" + std::to_string(t)) ==
                    Shape{1, 16 + skip_width, res, res},
                "skip wiring mismatch at decoder stage " + std::to_string(t));
        require(stage_shape("tconv" + std::to_string(t)) == Shape{1, 16, 2 * res, 2 * res},
                "upsampling mismatch at decoder stage " + std::to_string(t));
    }
    std::printf("        8 blocks x 4 convs, 7 tconvs, bottleneck at 1x1, output 48x128x128\n");
}

// ---- criterion 3: mask oracle equivalence -----------------------------------

void criterion_mask_oracle() {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        CitySpec spec;
        spec.seed = 5000 + seed;
        spec.height = 32;
        spec.width = 32;
        spec.road_density = 0.2 + 0.02 * static_cast<double>(seed % 5);
        spec.n_arterials = 2 + static_cast<int64_t>(seed % 3);
        const GroundTruth gt = build_city(spec);
        const std::vector<Movie> movies{simulate_day(gt, spec, 0), simulate_day(gt, spec, 1)};
        const RoadMasks masks = compute_masks(movies);

        for (int64_t d = 0; d < channels::direction_count; ++d) {
            for (int64_t y = 0; y < gt.height; ++y) {
                for (int64_t x = 0; x < gt.width; ++x) {
                    bool any_positive = false;
                    for (const Movie& movie : movies) {
                        for (int64_t t = 0; t < movie.frame_count && !any_positive; ++t) {
                            any_positive = movie.at(t, y, x, channels::speed(d)) > 0;
                        }
                    }
                    const uint8_t expect = (gt.raster_at(d, y, x) && any_positive) ? 1 : 0;
                    if (masks.at(d, y, x) != expect) {
                        throw CheckFailure("mask mismatch at seed " + std::to_string(seed) +
                                           " d=" + std::to_string(d) + " (" +
                                           std::to_string(y) + "," + std::to_string(x) + ")");
                    }
                }
            }
        }
    }
    std::printf("        computed masks equal ground-truth rasters, 10 seeds, exact\n");
}

// ---- criterion 4: conditional masking lemma ---------------------------------

void criterion_mask_lemma() {
    Rng rng(404);
    int strict = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int64_t h = 2 * rng.uniform_int(2, 6);
        const int64_t w = 2 * rng.uniform_int(2, 6);
        RoadMasks masks;
        masks.height = h;
        masks.width = w;
        for (auto& m : masks.masks) {
            m.resize(static_cast<size_t>(h * w));
            for (auto& v : m) v = rng.uniform01() < 0.5 ? 1 : 0;
        }
        Tensor pred = Tensor::zeros({kSampleTargetChannels, h, w});
        for (double& v : pred.mutable_data()) v = rng.uniform01();
        Tensor target = Tensor::zeros({kSampleTargetChannels, h, w});
        for (double& v : target.mutable_data()) v = rng.uniform01();
        {
            auto t = target.mutable_data();
            const int64_t plane = h * w;
            for (int64_t k = 0; k < kOutputFrames; ++k) {
                for (int64_t d = 0; d < channels::direction_count; ++d) {
                    for (int64_t c : {channels::volume(d), channels::speed(d)}) {
                        for (int64_t i = 0; i < plane; ++i) {
                            if (!masks.masks[static_cast<size_t>(d)][static_cast<size_t>(i)]) {
                                t[static_cast<size_t>(
                                    (k * channels::output_count + c) * plane + i)] = 0.0;
                            }
                        }
                    }
                }
            }
        }
        const MaskLemmaResult res = mask_mse_lemma_check(pred, target, masks);
        require(res.precondition_ok, "lemma precondition unexpectedly violated");
        require(res.mse_after <= res.mse_before, "masking increased MSE in trial " +
                                                     std::to_string(trial));
        const Tensor masked = apply_masks(pred, masks);
        double off_energy = 0.0;
        for (int64_t i = 0; i < pred.numel(); ++i) {
            const double diff = pred.data()[static_cast<size_t>(i)] -
                                masked.data()[static_cast<size_t>(i)];
            off_energy += diff * diff;
        }
        if (off_energy > 0.0) {
            require(res.mse_after < res.mse_before,
                    "off-mask energy > 0 but masking was not strictly better");
            ++strict;
        }
    }
    std::printf("        100 trials, MSE(masked) <= MSE(unmasked), strict in %d\n", strict);
}

// ---- criterion 5 (+9): ablation study under regime shift --------------------

struct AblationOutcome {
    std::vector<std::array<double, 4>> rows_by_seed;  // base, +mask, +two, final
    std::vector<double> model_60min;
    std::vector<double> persistence_60min;
    double elapsed_seconds = 0.0;
};

AblationOutcome g_ablation;

void criterion_ablation() {
    const auto t0 = std::chrono::steady_clock::now();

    for (uint64_t seed = 1; seed <= 5; ++seed) {
        CitySpec city;
        city.seed = derive_seed(9000 + seed, 0x63697479);
        city.height = 64;
        city.width = 64;
        city.road_density = 0.25;
        city.n_arterials = 3;
        city.noise_level = 0.04;
        city.second_half_speed_factor = 0.75;
        city.second_half_volume_offset = 12.0;

        TrainConfig cfg;
        cfg.seed = 9000 + seed;
        cfg.learning_rate = 3e-4;
        cfg.pretrain_epochs = 3;
        cfg.finetune_epochs = 1;
        cfg.batch_size = 4;
        cfg.arch.depth = 4;  // reduced depth, 64px desk profile
        cfg.arch.growth = 12;
        cfg.arch.base_channels = 12;
        cfg.arch.input_height = 64;
        cfg.arch.input_width = 64;
        cfg.train_sample_stride = 24;
        cfg.finetune_sample_stride = 4;
        cfg.eval_sample_stride = 12;

        const auto scenario = testutil::make_tiny_scenario(city, 18, 2);
        const SplitIndices split = split_dataset(*scenario.movies, scenario.regimes);
        const SampleSet train(scenario.movies, scenario.static_map, split.train,
                              cfg.train_sample_stride);
        const SampleSet validation(scenario.movies, scenario.static_map, split.validation,
                                   cfg.finetune_sample_stride);
        const SampleSet test(scenario.movies, scenario.static_map, split.test,
                             cfg.eval_sample_stride);

        MaskAccumulator acc;
        for (size_t idx : split.train) acc.add((*scenario.movies)[idx]);
        const RoadMasks masks = acc.finish();

        testutil::TempDir ckpt_dir("acceptance-ablate");
        const AblationTable table =
            run_ablation(cfg, train, validation, test, masks, ckpt_dir.path / "pre.gfck",
                         ckpt_dir.path / "final.gfck");

        g_ablation.rows_by_seed.push_back({table.rows[0].report.overall_mse,
                                           table.rows[1].report.overall_mse,
                                           table.rows[2].report.overall_mse,
                                           table.rows[3].report.overall_mse});
        g_ablation.model_60min.push_back(table.rows[3].report.per_timestamp_mse[5]);
        const EvalReport persistence = evaluate_predictor(persistence_baseline, test);
        g_ablation.persistence_60min.push_back(persistence.per_timestamp_mse[5]);

        std::printf("        seed %llu: base %s  +mask %s  +two-stage %s  final %s\n",
                    static_cast<unsigned long long>(seed),
                    fmt(table.rows[0].report.overall_mse).c_str(),
                    fmt(table.rows[1].report.overall_mse).c_str(),
                    fmt(table.rows[2].report.overall_mse).c_str(),
                    fmt(table.rows[3].report.overall_mse).c_str());
        std::fflush(stdout);
    }

    g_ablation.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // Inter-seed standard deviation of the final row, the slack for (c).
    double mean = 0.0;
    for (const auto& r : g_ablation.rows_by_seed) mean += r[3] / 5.0;
    double var = 0.0;
    for (const auto& r : g_ablation.rows_by_seed) var += (r[3] - mean) * (r[3] - mean) / 4.0;
    const double sigma = std::sqrt(var);

    int mask_ok = 0, two_stage_ok = 0, final_ok = 0;
    for (const auto& r : g_ablation.rows_by_seed) {
        if (r[1] <= r[0]) ++mask_ok;
        if (r[2] < r[0]) ++two_stage_ok;
        if (r[3] <= std::min(r[1], r[2]) + sigma) ++final_ok;
    }
    require(mask_ok >= 4, "(a) +mask <= baseline held in only " + std::to_string(mask_ok) +
                              "/5 seeds");
    require(two_stage_ok >= 4, "(b) +two-stage < baseline held in only " +
                                   std::to_string(two_stage_ok) + "/5 seeds");
    require(final_ok >= 4, "(c) final <= min(+mask,+two-stage)+sigma held in only " +
                               std::to_string(final_ok) + "/5 seeds");
    require(g_ablation.elapsed_seconds < 1800.0,
            "ablation took " + fmt(g_ablation.elapsed_seconds) + "s, budget is 1800s");
    std::printf("        (a) %d/5  (b) %d/5  (c) %d/5 (sigma %s), %.0fs total\n", mask_ok,
                two_stage_ok, final_ok, fmt(sigma).c_str(), g_ablation.elapsed_seconds);
}

// ---- criterion 6: sample extraction arithmetic ------------------------------

void criterion_extraction() {
    require(sample_count(288) == 265, "288 frames must yield 265 samples");
    require(output_offsets() == std::array<int64_t, 6>{1, 2, 3, 6, 9, 12},
            "offsets must be {1,2,3,6,9,12}");

    Movie movie;
    movie.city = "arith";
    movie.frame_count = 288;
    movie.height = 2;
    movie.width = 2;
    movie.channel_count = 9;
    movie.values.resize(static_cast<size_t>(288 * 2 * 2 * 9));
    for (int64_t t = 0; t < 288; ++t) {
        for (int64_t i = 0; i < 2 * 2 * 9; ++i) {
            movie.values[static_cast<size_t>(t * 36 + i)] = static_cast<uint8_t>(t % 251);
        }
    }
    StaticMap static_map;
    static_map.height = 2;
    static_map.width = 2;
    static_map.values.assign(4, 0);

    const auto samples = extract_samples(movie, static_map);
    require(samples.size() == 265, "extract_samples returned " +
                                       std::to_string(samples.size()) + " samples");
    const int64_t expect_frames[6] = {12, 13, 14, 17, 20, 23};
    for (int64_t k = 0; k < 6; ++k) {
        const double expect = normalize_value(static_cast<uint8_t>(expect_frames[k] % 251));
        require(samples[0].target.data()[static_cast<size_t>(k * 8 * 4)] == expect,
                "target offset " + std::to_string(k) + " reads the wrong frame");
    }
    std::printf("        288 frames -> 265 windows, offsets {1,2,3,6,9,12} after frame 11\n");
}

// ---- criterion 7: subcommand determinism ------------------------------------

void criterion_determinism() {
    testutil::TempDir dir_a("acc-det-a");
    testutil::TempDir dir_b("acc-det-b");

    const auto config_text = [](const std::string& root) {
        std::ostringstream os;
        os << "[run]\nseed = 4242\nout_dir = " << root << "/out\n"
           << "[paths]\ndata_dir = " << root << "/data\nmasks = " << root << "/out/masks.gfmk\n"
           << "pretrain_checkpoint = " << root << "/out/pre.gfck\n"
           << "checkpoint = " << root << "/out/model.gfck\n"
           << "report_dir = " << root << "/out/report\n"
           << "[city]\nheight = 32\nwidth = 32\nroad_density = 0.3\narterials = 3\n"
           << "[scenario]\ndays_first_half = 3\ndays_second_half = 2\n"
           << "[arch]\ndepth = 2\ngrowth = 6\nbase_channels = 6\n"
           << "[train]\npretrain_epochs = 1\nfinetune_epochs = 1\nbatch_size = 4\n"
           << "train_sample_stride = 32\nfinetune_sample_stride = 16\neval_sample_stride = 32\n";
        return os.str();
    };
    for (const auto* dir : {&dir_a, &dir_b}) {
        const auto cfg_path = dir->path / "run.cfg";
        std::ofstream(cfg_path) << config_text(dir->path.string());
        require(run_cli({"generate", "--config", cfg_path.string()}) == 0, "generate failed");
        require(run_cli({"mask", "--config", cfg_path.string()}) == 0, "mask failed");
        require(run_cli({"ablate", "--config", cfg_path.string()}) == 0, "ablate failed");
        require(run_cli({"evaluate", "--config", cfg_path.string(), "--mask"}) == 0,
                "evaluate failed");
        require(run_cli({"report", "--config", cfg_path.string(), "--mask"}) == 0,
                "report failed");
    }

    const auto both_equal = [&](const std::string& rel) {
        require(testutil::files_equal(dir_a.path / rel, dir_b.path / rel),
                rel + " differs between identical runs");
    };
    both_equal("data/day_000.gfmv");
    both_equal("data/day_004.gfmv");
    both_equal("data/manifest.tsv");
    both_equal("out/masks.gfmk");
    both_equal("out/pre.gfck");
    both_equal("out/model.gfck");
    both_equal("out/report/ablation.csv");
    both_equal("out/report/ablation.txt");
    both_equal("out/report/loss_curve.csv");
    both_equal("out/report/eval.csv");
    int64_t pgms = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(dir_a.path / "out" / "report")) {
        if (entry.path().extension() != ".pgm") continue;
        ++pgms;
        both_equal("out/report/" + entry.path().filename().string());
    }
    require(pgms == 18, "expected 18 heatmap panels");
    std::printf("        movies, masks, checkpoints, tables and reports identical, 2 runs\n");
}

// ---- criterion 8: container round trips and structured errors ---------------

void criterion_containers() {
    testutil::TempDir dir("acc-fmt");

    const auto corrupt = [&](const std::filesystem::path& src, const std::string& mode) {
        auto bytes = testutil::read_file_bytes(src);
        if (mode == "magic") {
            bytes[0] ^= 0x5a;
        } else if (mode == "truncate") {
            bytes.resize(bytes.size() - 1);
        } else {  // extents
            for (size_t i = 6; i < 22 && i < bytes.size(); ++i) bytes[i] = 0xff;
        }
        const auto dst = src.parent_path() / (mode + "-" + src.filename().string());
        std::ofstream(dst, std::ios::binary)
            .write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
        return dst;
    };
    const auto expect_throw = [](auto&& fn, const std::string& what) {
        try {
            fn();
        } catch (const IoError&) {
            return;
        }
        throw CheckFailure("expected structured error for " + what);
    };

    // Movie container.
    const Movie movie = testutil::random_movie(31, 288, 16, 16, 9);
    const auto movie_path = dir.path / "m.gfmv";
    write_movie(movie, movie_path);
    require(read_movie(movie_path) == movie, "movie round trip not bitwise");
    write_movie(read_movie(movie_path), dir.path / "m2.gfmv");
    require(testutil::files_equal(movie_path, dir.path / "m2.gfmv"),
            "movie re-serialization differs");
    try {
        read_movie(corrupt(movie_path, "magic"));
        throw CheckFailure("bad magic accepted");
    } catch (const BadMagicError&) {}
    try {
        read_movie(corrupt(movie_path, "truncate"));
        throw CheckFailure("truncated movie accepted");
    } catch (const TruncatedError&) {}
    try {
        read_movie(corrupt(movie_path, "extents"));
        throw CheckFailure("overflowing extents accepted");
    } catch (const ExtentError&) {}

    // Mask container.
    RoadMasks masks;
    masks.city = "acc";
    masks.height = 19;
    masks.width = 23;
    Rng rng(5);
    for (auto& m : masks.masks) {
        m.resize(19 * 23);
        for (auto& v : m) v = rng.uniform01() < 0.4 ? 1 : 0;
    }
    const auto mask_path = dir.path / "m.gfmk";
    write_masks(masks, mask_path);
    require(read_masks(mask_path) == masks, "mask round trip not bitwise");
    write_masks(read_masks(mask_path), dir.path / "m2.gfmk");
    require(testutil::files_equal(mask_path, dir.path / "m2.gfmk"),
            "mask re-serialization differs");
    expect_throw([&] { read_masks(corrupt(mask_path, "magic")); }, "mask bad magic");
    expect_throw([&] { read_masks(corrupt(mask_path, "truncate")); }, "mask truncation");

    // Checkpoint container.
    ArchConfig cfg;
    cfg.depth = 2;
    cfg.growth = 4;
    cfg.base_channels = 4;
    cfg.in_channels = 5;
    cfg.input_height = 8;
    cfg.input_width = 8;
    ModelParams params = build_model(cfg, 77);
    const auto ckpt_path = dir.path / "m.gfck";
    save_checkpoint(params, ckpt_path);
    save_checkpoint(load_checkpoint(ckpt_path), dir.path / "m2.gfck");
    require(testutil::files_equal(ckpt_path, dir.path / "m2.gfck"),
            "checkpoint re-serialization differs");
    expect_throw([&] { load_checkpoint(corrupt(ckpt_path, "magic")); }, "checkpoint bad magic");
    expect_throw([&] { load_checkpoint(corrupt(ckpt_path, "truncate")); },
                 "checkpoint truncation");
    std::printf("        GFMV/GFMK/GFCK bitwise round trips; magic/truncation/extent errors\n");
}

// ---- criterion 9: model beats persistence at the 60-minute horizon ----------

void criterion_persistence() {
    require(g_ablation.model_60min.size() == 5, "ablation results missing");
    int better = 0;
    for (size_t i = 0; i < 5; ++i) {
        if (g_ablation.model_60min[i] < g_ablation.persistence_60min[i]) ++better;
    }
    for (size_t i = 0; i < 5; ++i) {
        std::printf("        seed %zu: model %s vs persistence %s at 60 min\n", i + 1,
                    fmt(g_ablation.model_60min[i]).c_str(),
                    fmt(g_ablation.persistence_60min[i]).c_str());
    }
    require(better >= 4, "model beat persistence at 60 min in only " +
                             std::to_string(better) + "/5 seeds");
}

// ---- harness -----------------------------------------------------------------

struct Criterion {
    const char* name;
    std::function<void()> fn;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"1. gradient correctness (per-op < 1e-4, end-to-end < 1e-3, < 60s)",
         criterion_gradients},
        {"2. architecture conformance (8 blocks / 7 tconvs / skip wiring)",
         criterion_architecture},
        {"3. mask oracle equivalence (exact, 10 seeds)", criterion_mask_oracle},
        {"4. conditional masking lemma (100 random trials)", criterion_mask_lemma},
        {"5. ablation directional reproduction (5 seeds, < 30 min)", criterion_ablation},
        {"6. sample extraction arithmetic (265 windows, offsets)", criterion_extraction},
        {"7. subcommand determinism (bitwise artifacts)", criterion_determinism},
        {"8. container round trips and structured errors", criterion_containers},
        {"9. trained model beats persistence at 60 min (4/5 seeds)", criterion_persistence},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::printf("[ RUN  ] %s\n", c.name);
        std::fflush(stdout);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.fn();
            const double dt =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("[ PASS ] %s (%.1fs)\n", c.name, dt);
        } catch (const std::exception& e) {
            ++failures;
            std::printf("[ FAIL ] %s: %s\n", c.name, e.what());
        }
        std::fflush(stdout);
    }
    std::printf("%d/%zu acceptance criteria passed\n",
                static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
