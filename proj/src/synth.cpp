#include "gridflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridflow/rng.hpp"

namespace gridflow {

namespace {

constexpr uint64_t kGeometryStream = 0x67656f6d;   // distinct substreams of the
constexpr uint64_t kTrafficStream = 0x74726166;    // city seed
constexpr uint64_t kTextureStream = 0x74657874;

struct Street {
    bool horizontal = false;
    int64_t fixed = 0;  // row for horizontal, column for vertical
    int64_t from = 0;   // inclusive start along the street
    int64_t to = 0;     // inclusive end
    bool forward = true;   // carries the first direction of its pair
    bool backward = true;  // carries the second
};

// Horizontal streets carry NE/SW, vertical streets NW/SE. union_map tracks
// pixels on any raster; road_count stays in sync with it.
void rasterize(const Street& s, GroundTruth& gt, std::vector<uint8_t>& union_map,
               int64_t& road_count) {
    const auto mark = [&](int64_t d, int64_t y, int64_t x) {
        const size_t i = static_cast<size_t>(y * gt.width + x);
        gt.direction_rasters[static_cast<size_t>(d)][i] = 1;
        if (!union_map[i]) {
            union_map[i] = 1;
            ++road_count;
        }
    };
    for (int64_t p = s.from; p <= s.to; ++p) {
        const int64_t y = s.horizontal ? s.fixed : p;
        const int64_t x = s.horizontal ? p : s.fixed;
        if (s.horizontal) {
            if (s.forward) mark(channels::NE, y, x);
            if (s.backward) mark(channels::SW, y, x);
        } else {
            if (s.forward) mark(channels::NW, y, x);
            if (s.backward) mark(channels::SE, y, x);
        }
    }
}

void pick_direction_mode(Rng& rng, Street& s) {
    const double u = rng.uniform01();
    s.forward = true;
    s.backward = true;
    if (u < 0.2) {
        s.backward = false;  // one-way
    } else if (u < 0.4) {
        s.forward = false;
    }
}

uint8_t quantize_u8(double v) {
    const long long r = std::llround(v);
    return static_cast<uint8_t>(std::clamp<long long>(r, 0, 255));
}

struct Incident {
    int64_t y = 0, x = 0;
    int64_t radius = 0;
    int64_t t_begin = 0, t_end = 0;  // [t_begin, t_end)
    double severity = 0.5;           // speed multiplier while active
    uint8_t level = 0;               // event channel value
};

}  // namespace

GroundTruth build_city(const CitySpec& spec) {
    if (spec.height < 32 || spec.width < 32) {
        throw DegenerateSpecError("build_city: city must be at least 32x32");
    }
    if (!(spec.road_density > 0.0 && spec.road_density < 1.0)) {
        throw DegenerateSpecError("build_city: road_density must be in (0,1)");
    }

    GroundTruth gt;
    gt.height = spec.height;
    gt.width = spec.width;
    for (auto& raster : gt.direction_rasters) {
        raster.assign(static_cast<size_t>(spec.height * spec.width), 0);
    }
    gt.intersections.assign(static_cast<size_t>(spec.height * spec.width), 0);

    Rng rng(derive_seed(spec.seed, kGeometryStream));
    std::vector<uint8_t> union_map(static_cast<size_t>(spec.height * spec.width), 0);
    int64_t road_count = 0;

    // Arterials: a jittered grid of full-length streets.
    std::vector<Street> arterials;
    for (int orientation = 0; orientation < 2; ++orientation) {
        const bool horizontal = orientation == 0;
        const int64_t extent = horizontal ? spec.height : spec.width;
        const int64_t along = horizontal ? spec.width : spec.height;
        for (int64_t i = 0; i < spec.n_arterials; ++i) {
            Street s;
            s.horizontal = horizontal;
            const double center = (static_cast<double>(i) + 0.5) * static_cast<double>(extent) /
                                  static_cast<double>(spec.n_arterials);
            const double jitter_range = static_cast<double>(extent) /
                                        (4.0 * static_cast<double>(spec.n_arterials));
            const double jitter = rng.uniform(-jitter_range, jitter_range);
            s.fixed = std::clamp<int64_t>(static_cast<int64_t>(std::llround(center + jitter)), 0,
                                          extent - 1);
            s.from = 0;
            s.to = along - 1;
            pick_direction_mode(rng, s);
            rasterize(s, gt, union_map, road_count);
            arterials.push_back(s);
        }
    }

    // Side streets sprout from arterials until the target density is met.
    if (!arterials.empty()) {
        const int64_t target = static_cast<int64_t>(spec.road_density *
                                                    static_cast<double>(spec.height * spec.width));
        const int64_t max_attempts = 64 * (spec.height + spec.width);
        for (int64_t attempt = 0; attempt < max_attempts && road_count < target; ++attempt) {
            const Street& base =
                arterials[static_cast<size_t>(rng.uniform_index(arterials.size()))];
            Street s;
            s.horizontal = !base.horizontal;  // perpendicular to its parent
            const int64_t anchor = rng.uniform_int(base.from, base.to);
            // The side street crosses the parent at position anchor along it.
            s.fixed = anchor;
            const int64_t along = s.horizontal ? spec.width : spec.height;
            const int64_t max_len = std::max<int64_t>(4, along / 3);
            const int64_t len = rng.uniform_int(4, max_len);
            const bool positive = rng.uniform01() < 0.5;
            const int64_t start = base.fixed;
            if (positive) {
                s.from = start;
                s.to = std::min(along - 1, start + len);
            } else {
                s.from = std::max<int64_t>(0, start - len);
                s.to = start;
            }
            pick_direction_mode(rng, s);
            rasterize(s, gt, union_map, road_count);
        }
    }

    if (road_count == 0) {
        throw DegenerateSpecError("build_city: spec produced no roads");
    }

    // Intersections: pixels shared by a horizontal-orientation street and a
    // vertical-orientation street.
    for (int64_t i = 0; i < spec.height * spec.width; ++i) {
        const bool on_horizontal =
            gt.direction_rasters[channels::NE][static_cast<size_t>(i)] ||
            gt.direction_rasters[channels::SW][static_cast<size_t>(i)];
        const bool on_vertical =
            gt.direction_rasters[channels::NW][static_cast<size_t>(i)] ||
            gt.direction_rasters[channels::SE][static_cast<size_t>(i)];
        if (on_horizontal && on_vertical) gt.intersections[static_cast<size_t>(i)] = 1;
    }
    return gt;
}

Movie simulate_day(const GroundTruth& gt, const CitySpec& spec, int64_t day_index) {
    constexpr int64_t kFrames = 288;
    const int64_t h = gt.height;
    const int64_t w = gt.width;
    const int64_t plane = h * w;

    Movie movie;
    movie.city = city_name_for_seed(spec.seed);
    movie.day_index = static_cast<int32_t>(day_index);
    movie.frame_count = kFrames;
    movie.height = h;
    movie.width = w;
    movie.channel_count = channels::input_count;
    movie.values.assign(static_cast<size_t>(kFrames * plane * channels::input_count), 0);

    // Per-direction pixel lists with a stable per-pixel intensity texture.
    struct RoadPixel {
        int64_t y, x;
        double volume_factor, speed_factor;
    };
    std::array<std::vector<RoadPixel>, channels::direction_count> pixels;
    for (int64_t d = 0; d < channels::direction_count; ++d) {
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                if (!gt.raster_at(d, y, x)) continue;
                const uint64_t px_seed = derive_seed(spec.seed, kTextureStream,
                                                     static_cast<uint64_t>((d * h + y) * w + x));
                Rng texture(px_seed);
                pixels[static_cast<size_t>(d)].push_back(
                    {y, x, 0.7 + 0.6 * texture.uniform01(), 0.8 + 0.4 * texture.uniform01()});
            }
        }
    }

    Rng rng(derive_seed(spec.seed, kTrafficStream, static_cast<uint64_t>(day_index)));

    // A handful of incidents per day; each locally depresses speed and
    // raises the event channel inside its disk.
    std::vector<Incident> incidents;
    const int64_t n_incidents = rng.uniform_int(1, 4);
    std::vector<std::pair<int64_t, int64_t>> union_pixels;
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t d = 0; d < channels::direction_count; ++d) {
                if (gt.raster_at(d, y, x)) {
                    union_pixels.emplace_back(y, x);
                    break;
                }
            }
        }
    }
    for (int64_t i = 0; i < n_incidents; ++i) {
        Incident inc;
        const auto [y, x] =
            union_pixels[static_cast<size_t>(rng.uniform_index(union_pixels.size()))];
        inc.y = y;
        inc.x = x;
        inc.radius = rng.uniform_int(2, 5);
        inc.t_begin = rng.uniform_int(0, kFrames - 1);
        inc.t_end = std::min<int64_t>(kFrames, inc.t_begin + rng.uniform_int(6, 30));
        inc.severity = rng.uniform(0.35, 0.7);
        inc.level = static_cast<uint8_t>(rng.uniform_int(120, 255));
        incidents.push_back(inc);
    }

    const bool shifted = spec.seasonal_regime == Regime::second_half;
    const double speed_scale = shifted ? spec.second_half_speed_factor : 1.0;
    const double volume_offset = shifted ? spec.second_half_volume_offset : 0.0;
    const DiurnalProfile& prof = spec.diurnal;
    const double noise_scale = spec.noise_level * 255.0;

    for (int64_t t = 0; t < kFrames; ++t) {
        const double tm = static_cast<double>(t);
        const double bm = (tm - prof.morning_peak_frame) / prof.peak_width_frames;
        const double be = (tm - prof.evening_peak_frame) / prof.peak_width_frames;
        const double bumps = std::exp(-0.5 * bm * bm) + std::exp(-0.5 * be * be);
        const double volume_level = prof.base_volume + prof.peak_volume * bumps + volume_offset;
        const double speed_level =
            (prof.base_speed - prof.congestion_speed_drop * bumps) * speed_scale;

        uint8_t* frame = movie.values.data() + t * plane * channels::input_count;
        for (int64_t d = 0; d < channels::direction_count; ++d) {
            for (const RoadPixel& px : pixels[static_cast<size_t>(d)]) {
                double incident_factor = 1.0;
                for (const Incident& inc : incidents) {
                    if (t < inc.t_begin || t >= inc.t_end) continue;
                    const int64_t dy = px.y - inc.y;
                    const int64_t dx = px.x - inc.x;
                    if (dy * dy + dx * dx <= inc.radius * inc.radius) {
                        incident_factor = std::min(incident_factor, inc.severity);
                    }
                }
                const double volume =
                    volume_level * px.volume_factor + noise_scale * rng.normal();
                const double speed =
                    std::max(1.0, speed_level * px.speed_factor * incident_factor +
                                      noise_scale * rng.normal());
                uint8_t* cell = frame + (px.y * w + px.x) * channels::input_count;
                cell[channels::volume(d)] = quantize_u8(volume);
                cell[channels::speed(d)] = quantize_u8(speed);
            }
        }
        // Event channel: active incident disks over road pixels.
        for (const Incident& inc : incidents) {
            if (t < inc.t_begin || t >= inc.t_end) continue;
            for (int64_t y = std::max<int64_t>(0, inc.y - inc.radius);
                 y <= std::min(h - 1, inc.y + inc.radius); ++y) {
                for (int64_t x = std::max<int64_t>(0, inc.x - inc.radius);
                     x <= std::min(w - 1, inc.x + inc.radius); ++x) {
                    const int64_t dy = y - inc.y;
                    const int64_t dx = x - inc.x;
                    if (dy * dy + dx * dx > inc.radius * inc.radius) continue;
                    bool on_road = false;
                    for (int64_t d = 0; d < channels::direction_count; ++d) {
                        if (gt.raster_at(d, y, x)) {
                            on_road = true;
                            break;
                        }
                    }
                    if (!on_road) continue;
                    uint8_t* cell = frame + (y * w + x) * channels::input_count;
                    cell[channels::event] = std::max(cell[channels::event], inc.level);
                }
            }
        }
    }
    return movie;
}

std::string city_name_for_seed(uint64_t seed) {
    std::ostringstream os;
    os << "city-" << std::hex << (seed & 0xffffffffull);
    return os.str();
}

std::string Manifest::param(const std::string& key) const {
    for (const auto& [k, v] : params) {
        if (k == key) return v;
    }
    return "";
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& [key, value] : manifest.params) {
        out << "# " << key << " " << value << "\n";
    }
    for (const ManifestEntry& e : manifest.entries) {
        out << e.filename << "\t" << e.day_index << "\t" << regime_name(e.regime) << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    Manifest manifest;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const size_t start = body.find_first_not_of(' ');
            if (start == std::string::npos) continue;
            body = body.substr(start);
            const size_t space = body.find(' ');
            if (space == std::string::npos) {
                manifest.params.emplace_back(body, "");
            } else {
                manifest.params.emplace_back(body.substr(0, space), body.substr(space + 1));
            }
            continue;
        }
        std::istringstream fields(line);
        ManifestEntry entry;
        std::string day_text, regime_text;
        if (!std::getline(fields, entry.filename, '\t') ||
            !std::getline(fields, day_text, '\t') || !std::getline(fields, regime_text)) {
            throw IoError(path.string() + ": malformed manifest line: " + line);
        }
        entry.day_index = std::stoll(day_text);
        entry.regime = parse_regime(regime_text);
        manifest.entries.push_back(entry);
    }
    return manifest;
}

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Manifest generate_scenario(const CitySpec& spec, int64_t n_days_first_half,
                           int64_t n_days_second_half, const std::filesystem::path& out_dir) {
    if (n_days_first_half < 1 || n_days_second_half < 1) {
        throw DegenerateSpecError("generate_scenario: day counts must be >= 1");
    }
    std::filesystem::create_directories(out_dir);

    const GroundTruth gt = build_city(spec);

    Manifest manifest;
    manifest.params = {
        {"city", city_name_for_seed(spec.seed)},
        {"seed", std::to_string(spec.seed)},
        {"height", std::to_string(spec.height)},
        {"width", std::to_string(spec.width)},
        {"road_density", format_double(spec.road_density)},
        {"n_arterials", std::to_string(spec.n_arterials)},
        {"noise_level", format_double(spec.noise_level)},
        {"second_half_speed_factor", format_double(spec.second_half_speed_factor)},
        {"second_half_volume_offset", format_double(spec.second_half_volume_offset)},
        {"days_first_half", std::to_string(n_days_first_half)},
        {"days_second_half", std::to_string(n_days_second_half)},
        {"static_map", kStaticMapFilename},
        {"ground_truth", kGroundTruthFilename},
    };

    const int64_t total = n_days_first_half + n_days_second_half;
    for (int64_t day = 0; day < total; ++day) {
        CitySpec day_spec = spec;
        day_spec.seasonal_regime =
            day < n_days_first_half ? Regime::first_half : Regime::second_half;
        const Movie movie = simulate_day(gt, day_spec, day);

        std::ostringstream name;
        name << "day_";
        name.width(3);
        name.fill('0');
        name << day;
        name << ".gfmv";
        write_movie(movie, out_dir / name.str());
        manifest.entries.push_back({name.str(), day, day_spec.seasonal_regime});
    }

    StaticMap static_map;
    static_map.height = gt.height;
    static_map.width = gt.width;
    static_map.values = gt.intersections;
    write_static_map(static_map, out_dir / kStaticMapFilename);
    write_ground_truth(gt, out_dir / kGroundTruthFilename);
    write_manifest(manifest, out_dir / kManifestFilename);
    return manifest;
}

void write_static_map(const StaticMap& map, const std::filesystem::path& path) {
    Movie container;
    container.city = "static";
    container.frame_count = 1;
    container.height = map.height;
    container.width = map.width;
    container.channel_count = 1;
    container.values = map.values;
    write_movie(container, path);
}

StaticMap read_static_map(const std::filesystem::path& path) {
    const Movie container = read_movie(path);
    if (container.frame_count != 1 || container.channel_count != 1) {
        throw IoError(path.string() + ": not a static map container");
    }
    StaticMap map;
    map.height = container.height;
    map.width = container.width;
    map.values = container.values;
    return map;
}

void write_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
    Movie container;
    container.city = "ground-truth";
    container.frame_count = 1;
    container.height = gt.height;
    container.width = gt.width;
    container.channel_count = channels::direction_count + 1;
    container.values.assign(
        static_cast<size_t>(gt.height * gt.width * container.channel_count), 0);
    for (int64_t i = 0; i < gt.height * gt.width; ++i) {
        for (int64_t d = 0; d < channels::direction_count; ++d) {
            container.values[static_cast<size_t>(i * container.channel_count + d)] =
                gt.direction_rasters[static_cast<size_t>(d)][static_cast<size_t>(i)];
        }
        container.values[static_cast<size_t>(i * container.channel_count +
                                             channels::direction_count)] =
            gt.intersections[static_cast<size_t>(i)];
    }
    write_movie(container, path);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    const Movie container = read_movie(path);
    if (container.frame_count != 1 ||
        container.channel_count != channels::direction_count + 1) {
        throw IoError(path.string() + ": not a ground truth container");
    }
    GroundTruth gt;
    gt.height = container.height;
    gt.width = container.width;
    for (auto& raster : gt.direction_rasters) {
        raster.assign(static_cast<size_t>(gt.height * gt.width), 0);
    }
    gt.intersections.assign(static_cast<size_t>(gt.height * gt.width), 0);
    for (int64_t i = 0; i < gt.height * gt.width; ++i) {
        for (int64_t d = 0; d < channels::direction_count; ++d) {
            gt.direction_rasters[static_cast<size_t>(d)][static_cast<size_t>(i)] =
                container.values[static_cast<size_t>(i * container.channel_count + d)];
        }
        gt.intersections[static_cast<size_t>(i)] =
            container.values[static_cast<size_t>(i * container.channel_count +
                                                 channels::direction_count)];
    }
    return gt;
}

}  // namespace gridflow
