#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridflow/movie.hpp"
#include "gridflow/rng.hpp"
#include "gridflow/synth.hpp"

namespace testutil {

// Scratch directory removed when the test finishes.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<uint64_t> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("gridflow-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

inline bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
    return read_file_bytes(a) == read_file_bytes(b);
}

inline gridflow::Movie random_movie(uint64_t seed, int64_t frames, int64_t h, int64_t w,
                                    int64_t c) {
    gridflow::Movie m;
    m.city = "test";
    m.day_index = static_cast<int32_t>(seed);
    m.frame_count = frames;
    m.height = h;
    m.width = w;
    m.channel_count = c;
    m.values.resize(static_cast<size_t>(frames * h * w * c));
    gridflow::Rng rng(seed);
    for (uint8_t& v : m.values) v = static_cast<uint8_t>(rng.uniform_index(256));
    return m;
}

// A small in-memory scenario: one synthetic city, a few simulated days.
struct TinyScenario {
    gridflow::GroundTruth gt;
    std::shared_ptr<std::vector<gridflow::Movie>> movies;
    std::vector<gridflow::Regime> regimes;
    gridflow::StaticMap static_map;
};

inline TinyScenario make_tiny_scenario(gridflow::CitySpec spec, int64_t n_first,
                                       int64_t n_second) {
    TinyScenario s;
    s.gt = gridflow::build_city(spec);
    s.movies = std::make_shared<std::vector<gridflow::Movie>>();
    for (int64_t day = 0; day < n_first + n_second; ++day) {
        gridflow::CitySpec day_spec = spec;
        day_spec.seasonal_regime = day < n_first ? gridflow::Regime::first_half
                                                 : gridflow::Regime::second_half;
        s.movies->push_back(gridflow::simulate_day(s.gt, day_spec, day));
        s.regimes.push_back(day_spec.seasonal_regime);
    }
    s.static_map.height = s.gt.height;
    s.static_map.width = s.gt.width;
    s.static_map.values = s.gt.intersections;
    return s;
}

}  // namespace testutil
