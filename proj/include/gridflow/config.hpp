#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridflow/synth.hpp"
#include "gridflow/train.hpp"

namespace gridflow {

// Merged run configuration: one root seed, artifact paths, city/scenario
// generation settings and training settings. Parsed from a sectioned
// key-value file; unknown keys are rejected, command-line flags win.
struct RunConfig {
    uint64_t seed = 42;
    std::string out_dir = "out";

    std::string data_dir = "out/data";
    std::string masks_path = "out/masks.gfmk";
    std::string pretrain_checkpoint = "out/pretrain.gfck";
    std::string checkpoint = "out/model.gfck";
    std::string report_dir = "out/report";

    CitySpec city;  // city.seed == 0 means "derive from the run seed"
    int64_t days_first_half = 18;
    int64_t days_second_half = 2;

    TrainConfig train;

    // Resolves derived fields: city seed, train seed, arch input extents.
    void finalize();
};

struct ConfigEntry {
    std::string section;
    std::string key;
    std::string value;
};

std::vector<ConfigEntry> parse_ini(const std::string& text);

RunConfig make_run_config(const std::vector<ConfigEntry>& entries);
RunConfig load_run_config(const std::filesystem::path& path);

// One "section.key=value" override, as passed via --set.
void apply_override(RunConfig& cfg, const std::string& spec);

// Full resolved configuration in file syntax; echoed into every run
// directory and hashed for the run directory name.
std::string canonical_config_text(const RunConfig& cfg);

uint64_t fnv1a64(const std::string& text);

}  // namespace gridflow
