#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gridflow/cli.hpp"
#include "testutil.hpp"

using namespace gridflow;
using testutil::TempDir;

namespace {

std::string mini_config_text(const std::string& root, uint64_t seed = 77) {
    std::ostringstream os;
    os << "[run]\n"
       << "seed = " << seed << "\n"
       << "out_dir = " << root << "/out\n\n"
       << "[paths]\n"
       << "data_dir = " << root << "/data\n"
       << "masks = " << root << "/out/masks.gfmk\n"
       << "pretrain_checkpoint = " << root << "/out/pre.gfck\n"
       << "checkpoint = " << root << "/out/model.gfck\n"
       << "report_dir = " << root << "/out/report\n\n"
       << "[city]\n"
       << "height = 32\n"
       << "width = 32\n"
       << "road_density = 0.3\n"
       << "arterials = 3\n"
       << "noise_level = 0.04\n"
       << "shift_speed_factor = 0.7\n"
       << "shift_volume_offset = 15\n\n"
       << "[scenario]\n"
       << "days_first_half = 3\n"
       << "days_second_half = 2\n\n"
       << "[arch]\n"
       << "depth = 2\n"
       << "growth = 6\n"
       << "base_channels = 6\n\n"
       << "[train]\n"
       << "pretrain_epochs = 1\n"
       << "finetune_epochs = 1\n"
       << "batch_size = 4\n"
       << "train_sample_stride = 32\n"
       << "finetune_sample_stride = 16\n"
       << "eval_sample_stride = 32\n";
    return os.str();
}

std::filesystem::path write_mini_config(const TempDir& dir, uint64_t seed = 77) {
    const auto path = dir.path / "run.cfg";
    std::ofstream(path) << mini_config_text(dir.path.string(), seed);
    return path;
}

std::string first_csv_record(const std::filesystem::path& csv, const std::string& prefix) {
    std::ifstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) return line;
    }
    return "";
}

}  // namespace

TEST_CASE("usage errors exit with code 2, help with 0") {
    CHECK(run_cli({"definitely-not-a-subcommand"}) == 2);
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"train"}) == 2);  // missing required --config
    TempDir dir("cli-usage");
    const auto cfg = write_mini_config(dir);
    CHECK(run_cli({"train", "--config", cfg.string(), "--definitely-bogus-flag"}) == 2);
}

TEST_CASE("configuration errors exit with code 2") {
    TempDir dir("cli-cfg");
    const auto bad = dir.path / "bad.cfg";
    std::ofstream(bad) << "[run]\nseed = 1\nnonsense_key = 5\n";
    CHECK(run_cli({"generate", "--config", bad.string()}) == 2);

    const auto worse = dir.path / "worse.cfg";
    std::ofstream(worse) << "[run]\nseed = not-a-number\n";
    CHECK(run_cli({"generate", "--config", worse.string()}) == 2);

    CHECK(run_cli({"generate", "--config", (dir.path / "missing.cfg").string()}) == 2);
}

TEST_CASE("generate and mask build the scenario artifacts") {
    TempDir dir("cli-gen");
    const auto cfg = write_mini_config(dir);
    REQUIRE(run_cli({"generate", "--config", cfg.string()}) == 0);
    CHECK(std::filesystem::exists(dir.path / "data" / "manifest.tsv"));
    CHECK(std::filesystem::exists(dir.path / "data" / "day_000.gfmv"));
    CHECK(std::filesystem::exists(dir.path / "data" / "day_004.gfmv"));
    CHECK(std::filesystem::exists(dir.path / "data" / "static.gfmv"));

    REQUIRE(run_cli({"mask", "--config", cfg.string()}) == 0);
    const RoadMasks from_cli = read_masks(dir.path / "out" / "masks.gfmk");

    // The mask file matches compute_masks over the first-half (training) movies.
    std::vector<Movie> train_movies;
    for (int day = 0; day < 3; ++day) {
        std::ostringstream name;
        name << "day_00" << day << ".gfmv";
        train_movies.push_back(read_movie(dir.path / "data" / name.str()));
    }
    CHECK(compute_masks(train_movies).masks == from_cli.masks);
}

TEST_CASE("missing scenario data is a runtime failure, exit 1") {
    TempDir dir("cli-runtime");
    const auto cfg = write_mini_config(dir);
    CHECK(run_cli({"train", "--config", cfg.string()}) == 1);
}

TEST_CASE("composed subcommands reproduce the ablation rows bitwise") {
    TempDir ablate_dir("cli-ablate");
    TempDir composed_dir("cli-composed");
    const auto ablate_cfg = write_mini_config(ablate_dir);
    const auto composed_cfg = write_mini_config(composed_dir);

    // Route one: the one-shot ablation runner.
    REQUIRE(run_cli({"generate", "--config", ablate_cfg.string()}) == 0);
    REQUIRE(run_cli({"mask", "--config", ablate_cfg.string()}) == 0);
    REQUIRE(run_cli({"ablate", "--config", ablate_cfg.string()}) == 0);

    // Route two: generate, mask, train --two-stage, evaluate --mask.
    REQUIRE(run_cli({"generate", "--config", composed_cfg.string()}) == 0);
    REQUIRE(run_cli({"mask", "--config", composed_cfg.string()}) == 0);
    REQUIRE(run_cli({"train", "--config", composed_cfg.string(), "--two-stage"}) == 0);
    REQUIRE(run_cli({"evaluate", "--config", composed_cfg.string(), "--mask"}) == 0);

    // Same seeds, same data: checkpoints must match bitwise.
    CHECK(testutil::files_equal(ablate_dir.path / "out" / "pre.gfck",
                                composed_dir.path / "out" / "pre.gfck"));
    CHECK(testutil::files_equal(ablate_dir.path / "out" / "model.gfck",
                                composed_dir.path / "out" / "model.gfck"));

    // The composed evaluation reproduces the "Final model" row exactly.
    const std::string final_row =
        first_csv_record(ablate_dir.path / "out" / "report" / "ablation.csv", "Final model,");
    REQUIRE_FALSE(final_row.empty());
    std::ifstream eval_csv(composed_dir.path / "out" / "report" / "eval.csv");
    std::string header, values;
    std::getline(eval_csv, header);
    std::getline(eval_csv, values);
    // eval.csv: overall,ts...; ablation row: label,use_mask,use_two_stage,overall,ts...
    std::ostringstream row;
    row << "Final model,1,1,";
    CHECK(final_row.substr(0, row.str().size()) == row.str());
    const std::string row_metrics = final_row.substr(row.str().size());
    // Compare overall + six horizon values, full precision.
    std::istringstream row_fields(row_metrics), eval_fields(values);
    std::string a, b;
    for (int i = 0; i < 7; ++i) {
        REQUIRE(std::getline(row_fields, a, ','));
        REQUIRE(std::getline(eval_fields, b, ','));
        CHECK(a == b);
    }

    // Baseline row: plain train then evaluate without masks.
    TempDir base_dir("cli-base");
    const auto base_cfg = write_mini_config(base_dir);
    REQUIRE(run_cli({"generate", "--config", base_cfg.string()}) == 0);
    REQUIRE(run_cli({"train", "--config", base_cfg.string()}) == 0);
    REQUIRE(run_cli({"evaluate", "--config", base_cfg.string()}) == 0);
    const std::string base_row =
        first_csv_record(ablate_dir.path / "out" / "report" / "ablation.csv", "U-Net,");
    std::ifstream base_eval(base_dir.path / "out" / "report" / "eval.csv");
    std::getline(base_eval, header);
    std::getline(base_eval, values);
    std::istringstream base_row_fields(base_row.substr(std::string("U-Net,0,0,").size()));
    std::istringstream base_eval_fields(values);
    for (int i = 0; i < 7; ++i) {
        REQUIRE(std::getline(base_row_fields, a, ','));
        REQUIRE(std::getline(base_eval_fields, b, ','));
        CHECK(a == b);
    }
}

TEST_CASE("finetune subcommand continues from the pretrain checkpoint") {
    TempDir two_stage_dir("cli-2s");
    TempDir split_dir("cli-split");
    const auto cfg_a = write_mini_config(two_stage_dir);
    const auto cfg_b = write_mini_config(split_dir);

    REQUIRE(run_cli({"generate", "--config", cfg_a.string()}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg_a.string(), "--two-stage"}) == 0);

    REQUIRE(run_cli({"generate", "--config", cfg_b.string()}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg_b.string()}) == 0);
    REQUIRE(run_cli({"finetune", "--config", cfg_b.string()}) == 0);

    CHECK(testutil::files_equal(two_stage_dir.path / "out" / "model.gfck",
                                split_dir.path / "out" / "model.gfck"));
}

TEST_CASE("identical config and seed reproduce artifacts bitwise") {
    TempDir dir_a("cli-det-a");
    TempDir dir_b("cli-det-b");
    const auto cfg_a = write_mini_config(dir_a, 123);
    const auto cfg_b = write_mini_config(dir_b, 123);

    for (const auto& [dir, cfg] : {std::pair{&dir_a, &cfg_a}, std::pair{&dir_b, &cfg_b}}) {
        REQUIRE(run_cli({"generate", "--config", cfg->string()}) == 0);
        REQUIRE(run_cli({"mask", "--config", cfg->string()}) == 0);
        REQUIRE(run_cli({"train", "--config", cfg->string(), "--two-stage"}) == 0);
        REQUIRE(run_cli({"evaluate", "--config", cfg->string(), "--mask"}) == 0);
    }

    CHECK(testutil::files_equal(dir_a.path / "data" / "day_000.gfmv",
                                dir_b.path / "data" / "day_000.gfmv"));
    CHECK(testutil::files_equal(dir_a.path / "out" / "masks.gfmk",
                                dir_b.path / "out" / "masks.gfmk"));
    CHECK(testutil::files_equal(dir_a.path / "out" / "model.gfck",
                                dir_b.path / "out" / "model.gfck"));
    CHECK(testutil::files_equal(dir_a.path / "out" / "report" / "eval.csv",
                                dir_b.path / "out" / "report" / "eval.csv"));
    CHECK(testutil::files_equal(dir_a.path / "out" / "report" / "loss_curve.csv",
                                dir_b.path / "out" / "report" / "loss_curve.csv"));
}

TEST_CASE("predict and report write their artifacts") {
    TempDir dir("cli-predict");
    const auto cfg = write_mini_config(dir);
    REQUIRE(run_cli({"generate", "--config", cfg.string()}) == 0);
    REQUIRE(run_cli({"mask", "--config", cfg.string()}) == 0);
    REQUIRE(run_cli({"train", "--config", cfg.string()}) == 0);

    REQUIRE(run_cli({"predict", "--config", cfg.string(), "--mask", "--t", "10"}) == 0);
    // Day defaults to the first test movie (day 4 of 0..4).
    const Movie pred = read_movie(dir.path / "out" / "report" / "prediction_d4_t10.gfmv");
    CHECK(pred.frame_count == 6);
    CHECK(pred.channel_count == 8);
    CHECK(pred.height == 32);

    REQUIRE(run_cli({"report", "--config", cfg.string(), "--mask"}) == 0);
    int64_t pgms = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(dir.path / "out" / "report")) {
        if (entry.path().extension() == ".pgm") ++pgms;
    }
    CHECK(pgms == 18);
}

TEST_CASE("seed and --set overrides win over the config file") {
    TempDir dir("cli-override");
    const auto cfg = write_mini_config(dir, 5);
    REQUIRE(run_cli({"generate", "--config", cfg.string(), "--seed", "900",
                     "--set", "scenario.days_second_half=3"}) == 0);
    const Manifest manifest = read_manifest(dir.path / "data" / "manifest.tsv");
    CHECK(manifest.entries.size() == 6);
    CHECK(manifest.param("seed") != "5");
    int second = 0;
    for (const auto& e : manifest.entries) second += e.regime == Regime::second_half ? 1 : 0;
    CHECK(second == 3);
}
