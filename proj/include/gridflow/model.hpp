#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridflow/roadmask.hpp"
#include "gridflow/sample.hpp"
#include "gridflow/tensor.hpp"

namespace gridflow {

// Architecture of the dense-block encoder / transpose-conv decoder. With
// depth B there are B dense blocks, B-1 poolings, one bottleneck conv, B-1
// transpose convs and a linear 1x1 output head. The output of block n feeds
// the decoder stage B-1-n, which runs at the same resolution.
struct ArchConfig {
    int64_t depth = 8;
    int64_t growth = 16;
    int64_t layers_per_block = 4;
    int64_t base_channels = 16;  // width of the first block's layers
    int64_t in_channels = kSampleInputChannels;
    int64_t out_channels = kSampleTargetChannels;
    int64_t input_height = 128;
    int64_t input_width = 128;

    int64_t downsample_factor() const { return int64_t{1} << (depth - 1); }
    int64_t block_width(int64_t block) const { return block == 0 ? base_channels : growth; }
    int64_t block_in_channels(int64_t block) const {
        return block == 0 ? in_channels : block_width(block - 1);
    }
};

void validate_arch(const ArchConfig& cfg);

// Expected parameter names and shapes, in checkpoint order.
std::vector<std::pair<std::string, Shape>> parameter_census(const ArchConfig& cfg);

struct NamedParam {
    std::string name;
    Tensor value;
};

struct ModelParams {
    std::vector<NamedParam> items;

    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    std::vector<Tensor> tensors();  // shared handles, adam updates in place
    int64_t scalar_count() const;
    void zero_grads();
};

// Deterministic fan-in-scaled uniform initialization.
ModelParams build_model(const ArchConfig& cfg, uint64_t init_seed);

using TraceFn = std::function<void(const std::string& stage, const Shape& shape)>;

// One dense block: layer 0 consumes the block input, each later layer
// consumes concat(previous output, block input); every conv is 3x3 stride 1
// padding 1 followed by ReLU.
Tensor dense_block_forward(const ArchConfig& cfg, const ModelParams& params, int64_t block,
                           const Tensor& input);

// Full forward pass on [N,in_channels,H,W] with H,W divisible by 2^(B-1).
// Returns [N,out_channels,H,W]; the head is linear (no clamp).
Tensor forward(const ArchConfig& cfg, const ModelParams& params, const Tensor& input,
               const TraceFn& trace = nullptr);

// Inference on a single sample input [in_channels,H,W]: pads H,W up to the
// next multiple of 2^(B-1), runs forward, crops back, clamps to [0,1] and
// applies masks when given. Returns a detached [out_channels,H,W] tensor.
Tensor predict(const ArchConfig& cfg, const ModelParams& params, const Tensor& sample_input,
               const RoadMasks* masks = nullptr);

// GFCK checkpoint: magic, version u16, array count u32, then per array:
// name length u16 + UTF-8 name, rank u8, extents u32 each, raw
// little-endian f32 values. Write-read round trips are bit-exact.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Confirms a loaded checkpoint matches the census of cfg.
void validate_params(const ModelParams& params, const ArchConfig& cfg);

constexpr uint16_t kCheckpointFormatVersion = 1;

}  // namespace gridflow
