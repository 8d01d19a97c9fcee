#include "gridflow/movie.hpp"

#include "gridflow/io_binary.hpp"

namespace gridflow {

namespace channels {
const char* direction_name(int64_t direction) {
    switch (direction) {
        case NE: return "NE";
        case NW: return "NW";
        case SE: return "SE";
        case SW: return "SW";
        default: return "??";
    }
}
}  // namespace channels

namespace {

// Upper bound on a single container payload; anything bigger is a corrupt
// or hostile header, not a real desk-scale movie.
constexpr uint64_t kMaxPayloadBytes = 1ull << 40;

uint64_t checked_payload_size(uint64_t t, uint64_t h, uint64_t w, uint64_t c,
                              const std::string& source) {
    // Multiply stepwise; every factor fits in u32 so u64 products of two are
    // exact, and the running product is bounded before each step.
    uint64_t total = t;
    for (uint64_t factor : {h, w, c}) {
        if (factor != 0 && total > kMaxPayloadBytes / factor) {
            throw ExtentError(source + ": extents overflow payload limit");
        }
        total *= factor;
    }
    if (total > kMaxPayloadBytes) {
        throw ExtentError(source + ": extents overflow payload limit");
    }
    return total;
}

}  // namespace

void write_movie(const Movie& movie, const std::filesystem::path& path) {
    if (movie.frame_count < 0 || movie.height < 0 || movie.width < 0 ||
        movie.channel_count < 0 || movie.frame_count > UINT32_MAX || movie.height > UINT32_MAX ||
        movie.width > UINT32_MAX || movie.channel_count > UINT32_MAX) {
        throw ExtentError("write_movie: extents out of range for " + path.string());
    }
    const uint64_t expected =
        checked_payload_size(static_cast<uint64_t>(movie.frame_count),
                             static_cast<uint64_t>(movie.height),
                             static_cast<uint64_t>(movie.width),
                             static_cast<uint64_t>(movie.channel_count), path.string());
    if (expected != movie.values.size()) {
        throw ShapeError("write_movie: value buffer does not match extents");
    }

    BinaryWriter w(path);
    w.magic("GFMV");
    w.u16(kMovieFormatVersion);
    w.u32(static_cast<uint32_t>(movie.frame_count));
    w.u32(static_cast<uint32_t>(movie.height));
    w.u32(static_cast<uint32_t>(movie.width));
    w.u32(static_cast<uint32_t>(movie.channel_count));
    if (movie.city.size() > UINT16_MAX) throw ExtentError("write_movie: city name too long");
    w.u16(static_cast<uint16_t>(movie.city.size()));
    w.bytes(movie.city.data(), movie.city.size());
    w.i32(movie.day_index);
    w.bytes(movie.values.data(), movie.values.size());
    w.close();
}

Movie read_movie(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic("GFMV", "movie");
    const uint16_t version = r.u16();
    if (version != kMovieFormatVersion) {
        throw IoError(path.string() + ": unsupported movie format version " +
                      std::to_string(version));
    }
    Movie movie;
    const uint32_t t = r.u32();
    const uint32_t h = r.u32();
    const uint32_t w = r.u32();
    const uint32_t c = r.u32();
    const uint64_t payload = checked_payload_size(t, h, w, c, path.string());
    const uint16_t name_len = r.u16();
    movie.city.resize(name_len);
    if (name_len > 0) r.bytes(movie.city.data(), name_len);
    movie.day_index = r.i32();
    movie.frame_count = t;
    movie.height = h;
    movie.width = w;
    movie.channel_count = c;
    movie.values.resize(payload);
    if (payload > 0) r.bytes(movie.values.data(), payload);
    if (!r.at_end()) {
        throw TruncatedError(path.string() + ": trailing bytes after payload");
    }
    return movie;
}

}  // namespace gridflow
