#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridflow/movie.hpp"
#include "gridflow/sample.hpp"

namespace gridflow {

// Shape of the daily traffic curve: two Gaussian bumps over the 288-bin day.
// Values are on the raw u8 scale before quantization.
struct DiurnalProfile {
    double morning_peak_frame = 102.0;  // ~08:30
    double evening_peak_frame = 210.0;  // ~17:30
    double peak_width_frames = 26.0;
    double base_volume = 40.0;
    double peak_volume = 130.0;
    double base_speed = 160.0;
    double congestion_speed_drop = 80.0;
};

struct CitySpec {
    uint64_t seed = 1;
    int64_t height = 64;
    int64_t width = 64;
    double road_density = 0.25;
    int64_t n_arterials = 3;  // per orientation
    Regime seasonal_regime = Regime::first_half;
    double noise_level = 0.04;
    // Regime gap applied on second-half days: speed is scaled, volume gets a
    // flat offset (u8 scale).
    double second_half_speed_factor = 0.75;
    double second_half_volume_offset = 12.0;
    DiurnalProfile diurnal;
};

// Known road geometry: one binary raster per direction plus intersections.
// Horizontal streets carry NE/SW traffic, vertical streets NW/SE.
struct GroundTruth {
    int64_t height = 0;
    int64_t width = 0;
    std::array<std::vector<uint8_t>, channels::direction_count> direction_rasters;
    std::vector<uint8_t> intersections;

    uint8_t raster_at(int64_t d, int64_t y, int64_t x) const {
        return direction_rasters[static_cast<size_t>(d)][static_cast<size_t>(y * width + x)];
    }
    bool operator==(const GroundTruth& other) const = default;
};

// Deterministic in spec.seed; seasonal_regime never affects geometry.
GroundTruth build_city(const CitySpec& spec);

// One day of synthetic traffic: 288 frames, diurnal double peak, sparse
// incidents on the event channel, off-road traffic channels exactly zero.
Movie simulate_day(const GroundTruth& gt, const CitySpec& spec, int64_t day_index);

struct ManifestEntry {
    std::string filename;
    int64_t day_index = 0;
    Regime regime = Regime::first_half;
    bool operator==(const ManifestEntry& other) const = default;
};

struct Manifest {
    std::vector<std::pair<std::string, std::string>> params;  // echoed scenario settings
    std::vector<ManifestEntry> entries;
    bool operator==(const Manifest& other) const = default;

    std::string param(const std::string& key) const;  // "" when missing
};

// Writes n_first + n_second movie files plus static map, ground truth and
// manifest into out_dir. Returns the manifest that was written.
Manifest generate_scenario(const CitySpec& spec, int64_t n_days_first_half,
                           int64_t n_days_second_half, const std::filesystem::path& out_dir);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// Sidecar file names used by generate_scenario inside a scenario directory.
constexpr const char* kManifestFilename = "manifest.tsv";
constexpr const char* kStaticMapFilename = "static.gfmv";
constexpr const char* kGroundTruthFilename = "ground_truth.gfmv";

// The static map and ground truth ride in single-frame GFMV containers
// (T=1, C=1 for the static map, C=5 for the four rasters + intersections).
void write_static_map(const StaticMap& map, const std::filesystem::path& path);
StaticMap read_static_map(const std::filesystem::path& path);
void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);

std::string city_name_for_seed(uint64_t seed);

}  // namespace gridflow
