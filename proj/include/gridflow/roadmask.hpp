#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridflow/movie.hpp"
#include "gridflow/tensor.hpp"

namespace gridflow {

// Four binary H*W maps, one per direction, derived from training speeds.
struct RoadMasks {
    std::string city;
    int64_t height = 0;
    int64_t width = 0;
    std::array<std::vector<uint8_t>, channels::direction_count> masks;

    uint8_t at(int64_t d, int64_t y, int64_t x) const {
        return masks[static_cast<size_t>(d)][static_cast<size_t>(y * width + x)];
    }
    bool operator==(const RoadMasks& other) const = default;
};

// Streaming reduction over training movies: 64-bit speed sums per pixel,
// thresholded strictly above zero on the average.
class MaskAccumulator {
public:
    void add(const Movie& movie);
    RoadMasks finish() const;

private:
    std::string city_;
    int64_t height_ = 0;
    int64_t width_ = 0;
    int64_t frame_count_ = 0;
    std::array<std::vector<double>, channels::direction_count> speed_sums_;
};

// Average the speed channel of each direction over all frames of all
// training movies; mask pixel is 1 iff the average is > 0.
RoadMasks compute_masks(const std::vector<Movie>& training_movies);

// Multiplies the volume and speed channels of direction d by masks[d] in
// every output timestep. prediction is [48,H,W]; idempotent.
Tensor apply_masks(const Tensor& prediction, const RoadMasks& masks);

struct MaskLemmaResult {
    double mse_before = 0.0;
    double mse_after = 0.0;
    // Precondition: the target is zero wherever the matching mask is zero.
    bool precondition_ok = true;
    int64_t violations = 0;
};

// Checks the squared-error decomposition behind masking: when the target is
// zero off-mask, masking can only remove off-mask prediction energy.
MaskLemmaResult mask_mse_lemma_check(const Tensor& prediction, const Tensor& target,
                                     const RoadMasks& masks);

// GFMK container: header fields as in GFMV (T=1, C=4), then four bit-packed
// H*W planes, row-major, LSB-first.
void write_masks(const RoadMasks& masks, const std::filesystem::path& path);
RoadMasks read_masks(const std::filesystem::path& path);

constexpr uint16_t kMaskFormatVersion = 1;

}  // namespace gridflow
