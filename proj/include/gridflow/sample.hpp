#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gridflow/movie.hpp"
#include "gridflow/tensor.hpp"

namespace gridflow {

constexpr int64_t kInputFrames = 12;
constexpr int64_t kOutputFrames = 6;
constexpr int64_t kStaticChannels = 1;
// 12 input frames flattened time-into-channels, plus the static map.
constexpr int64_t kSampleInputChannels = kInputFrames * channels::input_count + kStaticChannels;
constexpr int64_t kSampleTargetChannels = kOutputFrames * channels::output_count;

// Binary per-city map of road intersections, used as the static input channel.
struct StaticMap {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<uint8_t> values;  // 0/1, row-major

    uint8_t at(int64_t y, int64_t x) const {
        return values[static_cast<size_t>(y * width + x)];
    }
};

// One training example. input: [109,H,W] in [0,1]; target: [48,H,W] in [0,1].
// Input channel f*9+c is channel c of relative frame f; channel 108 is the
// static map. Target channel k*8+c is output channel c at the k-th offset.
struct Sample {
    Tensor input;
    Tensor target;
    std::string city;
    int32_t day_index = 0;
    int64_t t_start = 0;
};

// u8 -> [0,1] by dividing by 255.
double normalize_value(uint8_t v);

// Prediction offsets in frames after the last input frame: 5/10/15/30/45/60
// minutes at 5-minute bins.
std::array<int64_t, 6> output_offsets();

// Number of valid window starts for a movie of frame_count frames; throws
// when the movie is shorter than 24 frames.
int64_t sample_count(int64_t frame_count);

Sample make_sample(const Movie& movie, const StaticMap& static_map, int64_t t_start);
std::vector<Sample> extract_samples(const Movie& movie, const StaticMap& static_map);

enum class Regime { first_half, second_half };
const char* regime_name(Regime r);
Regime parse_regime(const std::string& name);

struct SplitIndices {
    std::vector<size_t> train;
    std::vector<size_t> validation;
    std::vector<size_t> test;
};

// Deterministic split by day_index using the 181:18 train:validation ratio;
// the remainder becomes the test set and every split is forced non-empty.
SplitIndices split_dataset(const std::vector<Movie>& movies);

// Regime-aware split: first-half days train, second-half days are divided
// between validation and test.
SplitIndices split_dataset(const std::vector<Movie>& movies, const std::vector<Regime>& regimes);

}  // namespace gridflow
