#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridflow/errors.hpp"

namespace gridflow {

// Channel layout of raw movies: (volume, speed) pairs for the four heading
// quadrants in channels 0-7, event level in channel 8. Predictions cover
// the first 8 channels only.
namespace channels {
enum Direction { NE = 0, NW = 1, SE = 2, SW = 3 };
constexpr int64_t direction_count = 4;
constexpr int64_t input_count = 9;
constexpr int64_t output_count = 8;
constexpr int64_t event = 8;
constexpr int64_t volume(int64_t direction) { return 2 * direction; }
constexpr int64_t speed(int64_t direction) { return 2 * direction + 1; }
const char* direction_name(int64_t direction);
}  // namespace channels

// One day of traffic frames for one city. Frame values are stored t-major,
// row-major, channel-last: index = ((t*H + y)*W + x)*C + c.
struct Movie {
    std::string city;
    int32_t day_index = 0;
    int64_t frame_count = 0;
    int64_t height = 0;
    int64_t width = 0;
    int64_t channel_count = 0;
    int64_t bin_minutes = 5;
    std::vector<uint8_t> values;

    int64_t value_index(int64_t t, int64_t y, int64_t x, int64_t c) const {
        return ((t * height + y) * width + x) * channel_count + c;
    }
    uint8_t at(int64_t t, int64_t y, int64_t x, int64_t c) const {
        return values[static_cast<size_t>(value_index(t, y, x, c))];
    }
    uint8_t& at(int64_t t, int64_t y, int64_t x, int64_t c) {
        return values[static_cast<size_t>(value_index(t, y, x, c))];
    }

    bool operator==(const Movie& other) const = default;
};

// GFMV container: magic "GFMV", version u16, T/H/W/C u32, city-name length
// u16 + UTF-8 bytes, day_index i32, then the raw frame bytes. Round trips
// are bitwise lossless.
void write_movie(const Movie& movie, const std::filesystem::path& path);
Movie read_movie(const std::filesystem::path& path);

constexpr uint16_t kMovieFormatVersion = 1;

}  // namespace gridflow
