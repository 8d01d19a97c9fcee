#include "gridflow/sample.hpp"

#include <algorithm>
#include <numeric>

namespace gridflow {

double normalize_value(uint8_t v) { return static_cast<double>(v) / 255.0; }

std::array<int64_t, 6> output_offsets() { return {1, 2, 3, 6, 9, 12}; }

int64_t sample_count(int64_t frame_count) {
    const int64_t window = kInputFrames + output_offsets().back();  // 24 frames
    if (frame_count < window) {
        throw Error("movie too short: " + std::to_string(frame_count) + " frames, need " +
                    std::to_string(window));
    }
    return frame_count - window + 1;
}

Sample make_sample(const Movie& movie, const StaticMap& static_map, int64_t t_start) {
    if (movie.channel_count != channels::input_count) {
        throw ShapeError("make_sample: movie has " + std::to_string(movie.channel_count) +
                         " channels, expected " + std::to_string(channels::input_count));
    }
    if (static_map.height != movie.height || static_map.width != movie.width) {
        throw ShapeError("make_sample: static map extent mismatch");
    }
    const int64_t last = sample_count(movie.frame_count) - 1;
    if (t_start < 0 || t_start > last) {
        throw Error("make_sample: window start " + std::to_string(t_start) + " out of range");
    }

    const int64_t h = movie.height;
    const int64_t w = movie.width;
    const int64_t plane = h * w;

    std::vector<double> input(static_cast<size_t>(kSampleInputChannels * plane));
    for (int64_t f = 0; f < kInputFrames; ++f) {
        const uint8_t* frame = movie.values.data() +
                               (t_start + f) * plane * channels::input_count;
        for (int64_t c = 0; c < channels::input_count; ++c) {
            double* dst = input.data() + (f * channels::input_count + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                dst[i] = normalize_value(frame[i * channels::input_count + c]);
            }
        }
    }
    {
        double* dst = input.data() + kInputFrames * channels::input_count * plane;
        for (int64_t i = 0; i < plane; ++i) dst[i] = static_map.values[static_cast<size_t>(i)];
    }

    std::vector<double> target(static_cast<size_t>(kSampleTargetChannels * plane));
    const auto offsets = output_offsets();
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        const int64_t frame_index = t_start + kInputFrames - 1 + offsets[static_cast<size_t>(k)];
        const uint8_t* frame = movie.values.data() + frame_index * plane * channels::input_count;
        for (int64_t c = 0; c < channels::output_count; ++c) {
            double* dst = target.data() + (k * channels::output_count + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                dst[i] = normalize_value(frame[i * channels::input_count + c]);
            }
        }
    }

    Sample sample;
    sample.input = Tensor::from_vector(std::move(input), {kSampleInputChannels, h, w});
    sample.target = Tensor::from_vector(std::move(target), {kSampleTargetChannels, h, w});
    sample.city = movie.city;
    sample.day_index = movie.day_index;
    sample.t_start = t_start;
    return sample;
}

std::vector<Sample> extract_samples(const Movie& movie, const StaticMap& static_map) {
    const int64_t count = sample_count(movie.frame_count);
    std::vector<Sample> samples;
    samples.reserve(static_cast<size_t>(count));
    for (int64_t t = 0; t < count; ++t) samples.push_back(make_sample(movie, static_map, t));
    return samples;
}

const char* regime_name(Regime r) {
    return r == Regime::first_half ? "first_half" : "second_half";
}

Regime parse_regime(const std::string& name) {
    if (name == "first_half") return Regime::first_half;
    if (name == "second_half") return Regime::second_half;
    throw Error("unknown regime: " + name);
}

namespace {

std::vector<size_t> by_day_index(const std::vector<Movie>& movies) {
    std::vector<size_t> order(movies.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return movies[a].day_index < movies[b].day_index;
    });
    return order;
}

}  // namespace

SplitIndices split_dataset(const std::vector<Movie>& movies) {
    const size_t n = movies.size();
    if (n < 3) {
        throw Error("split_dataset: need at least 3 movies to fill three splits, got " +
                    std::to_string(n));
    }
    const auto order = by_day_index(movies);

    // 181 train : 18 validation files, remainder test, every split >= 1.
    size_t n_train = n * 181 / 199;
    size_t n_val = n * 18 / 199;
    size_t n_test = n - n_train - n_val;
    if (n_val == 0) {
        n_val = 1;
        n_train -= 1;
    }
    if (n_test == 0) {
        n_test = 1;
        n_train -= 1;
    }
    if (n_train == 0) {
        throw Error("split_dataset: not enough movies for a non-empty train split");
    }

    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + static_cast<ptrdiff_t>(n_train));
    split.validation.assign(order.begin() + static_cast<ptrdiff_t>(n_train),
                            order.begin() + static_cast<ptrdiff_t>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<ptrdiff_t>(n_train + n_val), order.end());
    return split;
}

SplitIndices split_dataset(const std::vector<Movie>& movies, const std::vector<Regime>& regimes) {
    if (movies.size() != regimes.size()) {
        throw Error("split_dataset: regime list does not match movie list");
    }
    SplitIndices split;
    std::vector<size_t> second;
    for (size_t idx : by_day_index(movies)) {
        if (regimes[idx] == Regime::first_half) {
            split.train.push_back(idx);
        } else {
            second.push_back(idx);
        }
    }
    if (split.train.empty() || second.size() < 2) {
        throw Error("split_dataset: need first-half movies and >=2 second-half movies");
    }
    const size_t n_val = second.size() / 2;
    split.validation.assign(second.begin(), second.begin() + static_cast<ptrdiff_t>(n_val));
    split.test.assign(second.begin() + static_cast<ptrdiff_t>(n_val), second.end());
    return split;
}

}  // namespace gridflow
