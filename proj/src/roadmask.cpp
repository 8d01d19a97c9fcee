#include "gridflow/roadmask.hpp"

#include "gridflow/io_binary.hpp"
#include "gridflow/sample.hpp"

namespace gridflow {

void MaskAccumulator::add(const Movie& movie) {
    if (movie.channel_count != channels::input_count) {
        throw ShapeError("compute_masks: movie has " + std::to_string(movie.channel_count) +
                         " channels, expected " + std::to_string(channels::input_count));
    }
    if (height_ == 0 && width_ == 0) {
        height_ = movie.height;
        width_ = movie.width;
        city_ = movie.city;
        for (auto& sums : speed_sums_) {
            sums.assign(static_cast<size_t>(height_ * width_), 0.0);
        }
    } else if (movie.height != height_ || movie.width != width_) {
        throw ShapeError("compute_masks: inconsistent movie extents");
    }

    const int64_t plane = height_ * width_;
    for (int64_t t = 0; t < movie.frame_count; ++t) {
        const uint8_t* frame = movie.values.data() + t * plane * channels::input_count;
        for (int64_t d = 0; d < channels::direction_count; ++d) {
            const int64_t c = channels::speed(d);
            double* sums = speed_sums_[static_cast<size_t>(d)].data();
            for (int64_t i = 0; i < plane; ++i) {
                sums[i] += static_cast<double>(frame[i * channels::input_count + c]);
            }
        }
    }
    frame_count_ += movie.frame_count;
}

RoadMasks MaskAccumulator::finish() const {
    if (frame_count_ == 0) {
        throw Error("compute_masks: empty training set");
    }
    RoadMasks result;
    result.city = city_;
    result.height = height_;
    result.width = width_;
    const double count = static_cast<double>(frame_count_);
    for (int64_t d = 0; d < channels::direction_count; ++d) {
        const auto& sums = speed_sums_[static_cast<size_t>(d)];
        auto& mask = result.masks[static_cast<size_t>(d)];
        mask.assign(sums.size(), 0);
        for (size_t i = 0; i < sums.size(); ++i) {
            mask[i] = (sums[i] / count > 0.0) ? 1 : 0;
        }
    }
    return result;
}

RoadMasks compute_masks(const std::vector<Movie>& training_movies) {
    MaskAccumulator acc;
    for (const Movie& movie : training_movies) acc.add(movie);
    return acc.finish();
}

Tensor apply_masks(const Tensor& prediction, const RoadMasks& masks) {
    if (prediction.rank() != 3 || prediction.extent(0) != kSampleTargetChannels) {
        throw ShapeError("apply_masks: prediction must be [48,H,W], got " +
                         shape_to_string(prediction.shape()));
    }
    const int64_t h = prediction.extent(1);
    const int64_t w = prediction.extent(2);
    if (h != masks.height || w != masks.width) {
        throw ShapeError("apply_masks: mask extent mismatch");
    }
    const int64_t plane = h * w;

    std::vector<double> out(prediction.data().begin(), prediction.data().end());
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        for (int64_t d = 0; d < channels::direction_count; ++d) {
            const uint8_t* mask = masks.masks[static_cast<size_t>(d)].data();
            for (int64_t c : {channels::volume(d), channels::speed(d)}) {
                double* channel = out.data() + (k * channels::output_count + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    if (!mask[i]) channel[i] = 0.0;
                }
            }
        }
    }
    return Tensor::from_vector(std::move(out), prediction.shape(), false);
}

MaskLemmaResult mask_mse_lemma_check(const Tensor& prediction, const Tensor& target,
                                     const RoadMasks& masks) {
    if (prediction.shape() != target.shape()) {
        throw ShapeError("mask_mse_lemma_check: prediction/target shape mismatch");
    }
    const Tensor masked = apply_masks(prediction, masks);
    const int64_t h = prediction.extent(1);
    const int64_t w = prediction.extent(2);
    const int64_t plane = h * w;

    MaskLemmaResult result;
    const auto p = prediction.data();
    const auto pm = masked.data();
    const auto t = target.data();
    double sse_before = 0.0;
    double sse_after = 0.0;
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        for (int64_t d = 0; d < channels::direction_count; ++d) {
            const uint8_t* mask = masks.masks[static_cast<size_t>(d)].data();
            for (int64_t c : {channels::volume(d), channels::speed(d)}) {
                const int64_t base = (k * channels::output_count + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    const double db = p[static_cast<size_t>(base + i)] -
                                      t[static_cast<size_t>(base + i)];
                    const double da = pm[static_cast<size_t>(base + i)] -
                                      t[static_cast<size_t>(base + i)];
                    sse_before += db * db;
                    sse_after += da * da;
                    if (!mask[i] && t[static_cast<size_t>(base + i)] != 0.0) {
                        result.precondition_ok = false;
                        ++result.violations;
                    }
                }
            }
        }
    }
    const double count = static_cast<double>(prediction.numel());
    result.mse_before = sse_before / count;
    result.mse_after = sse_after / count;
    return result;
}

void write_masks(const RoadMasks& masks, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.magic("GFMK");
    w.u16(kMaskFormatVersion);
    w.u32(1);  // header mirrors the movie container: T, H, W, C
    w.u32(static_cast<uint32_t>(masks.height));
    w.u32(static_cast<uint32_t>(masks.width));
    w.u32(static_cast<uint32_t>(channels::direction_count));
    if (masks.city.size() > UINT16_MAX) throw ExtentError("write_masks: city name too long");
    w.u16(static_cast<uint16_t>(masks.city.size()));
    w.bytes(masks.city.data(), masks.city.size());
    w.i32(0);  // day_index slot, unused for masks

    const int64_t plane = masks.height * masks.width;
    const int64_t packed_size = (plane + 7) / 8;
    std::vector<uint8_t> packed(static_cast<size_t>(packed_size));
    for (int64_t d = 0; d < channels::direction_count; ++d) {
        std::fill(packed.begin(), packed.end(), 0);
        const auto& mask = masks.masks[static_cast<size_t>(d)];
        if (static_cast<int64_t>(mask.size()) != plane) {
            throw ShapeError("write_masks: mask plane size mismatch");
        }
        for (int64_t i = 0; i < plane; ++i) {
            if (mask[static_cast<size_t>(i)]) {
                packed[static_cast<size_t>(i / 8)] |= static_cast<uint8_t>(1u << (i % 8));
            }
        }
        w.bytes(packed.data(), packed.size());
    }
    w.close();
}

RoadMasks read_masks(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic("GFMK", "road mask");
    const uint16_t version = r.u16();
    if (version != kMaskFormatVersion) {
        throw IoError(path.string() + ": unsupported mask format version " +
                      std::to_string(version));
    }
    const uint32_t t = r.u32();
    const uint32_t h = r.u32();
    const uint32_t w = r.u32();
    const uint32_t c = r.u32();
    if (t != 1 || c != channels::direction_count) {
        throw ExtentError(path.string() + ": mask container must have T=1, C=4");
    }
    const uint64_t plane = static_cast<uint64_t>(h) * w;
    if (plane > (1ull << 34)) {
        throw ExtentError(path.string() + ": extents overflow payload limit");
    }
    RoadMasks masks;
    const uint16_t name_len = r.u16();
    masks.city.resize(name_len);
    if (name_len > 0) r.bytes(masks.city.data(), name_len);
    r.i32();
    masks.height = h;
    masks.width = w;

    const size_t packed_size = static_cast<size_t>((plane + 7) / 8);
    std::vector<uint8_t> packed(packed_size);
    for (int64_t d = 0; d < channels::direction_count; ++d) {
        r.bytes(packed.data(), packed.size());
        auto& mask = masks.masks[static_cast<size_t>(d)];
        mask.assign(static_cast<size_t>(plane), 0);
        for (uint64_t i = 0; i < plane; ++i) {
            mask[static_cast<size_t>(i)] = (packed[static_cast<size_t>(i / 8)] >> (i % 8)) & 1u;
        }
    }
    if (!r.at_end()) {
        throw TruncatedError(path.string() + ": trailing bytes after payload");
    }
    return masks;
}

}  // namespace gridflow
