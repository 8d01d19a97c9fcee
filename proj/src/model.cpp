#include "gridflow/model.hpp"

#include <cmath>

#include "gridflow/io_binary.hpp"
#include "gridflow/rng.hpp"

namespace gridflow {

void validate_arch(const ArchConfig& cfg) {
    if (cfg.depth < 2) throw ConfigError("arch: depth must be >= 2");
    if (cfg.growth < 1 || cfg.base_channels < 1) {
        throw ConfigError("arch: channel widths must be >= 1");
    }
    if (cfg.layers_per_block < 1) throw ConfigError("arch: layers_per_block must be >= 1");
    if (cfg.in_channels < 1 || cfg.out_channels < 1) {
        throw ConfigError("arch: channel counts must be >= 1");
    }
    if (cfg.depth > 16) throw ConfigError("arch: depth too large");
    const int64_t factor = cfg.downsample_factor();
    if (cfg.input_height < factor || cfg.input_width < factor) {
        throw ConfigError("arch: input " + std::to_string(cfg.input_height) + "x" +
                          std::to_string(cfg.input_width) + " cannot survive " +
                          std::to_string(cfg.depth - 1) + " halvings (needs >= " +
                          std::to_string(factor) + " per side)");
    }
}

std::vector<std::pair<std::string, Shape>> parameter_census(const ArchConfig& cfg) {
    validate_arch(cfg);
    std::vector<std::pair<std::string, Shape>> census;
    for (int64_t b = 0; b < cfg.depth; ++b) {
        const int64_t width = cfg.block_width(b);
        const int64_t block_in = cfg.block_in_channels(b);
        for (int64_t l = 0; l < cfg.layers_per_block; ++l) {
            const int64_t layer_in = l == 0 ? block_in : width + block_in;
            const std::string base = "block" + std::to_string(b) + ".conv" + std::to_string(l);
            census.emplace_back(base + ".weight", Shape{width, layer_in, 3, 3});
            census.emplace_back(base + ".bias", Shape{width});
        }
    }
    const int64_t bottleneck_width = cfg.block_width(cfg.depth - 1);
    census.emplace_back("bottleneck.weight",
                        Shape{bottleneck_width, bottleneck_width, 3, 3});
    census.emplace_back("bottleneck.bias", Shape{bottleneck_width});

    int64_t current = bottleneck_width;
    for (int64_t t = 0; t < cfg.depth - 1; ++t) {
        const int64_t skip = cfg.block_width(cfg.depth - 1 - t);
        const std::string base = "tconv" + std::to_string(t);
        census.emplace_back(base + ".weight", Shape{current + skip, cfg.growth, 2, 2});
        census.emplace_back(base + ".bias", Shape{cfg.growth});
        current = cfg.growth;
    }
    census.emplace_back("head.weight", Shape{cfg.out_channels, current, 1, 1});
    census.emplace_back("head.bias", Shape{cfg.out_channels});
    return census;
}

const Tensor& ModelParams::at(const std::string& name) const {
    for (const NamedParam& item : items) {
        if (item.name == name) return item.value;
    }
    throw Error("unknown parameter: " + name);
}

Tensor& ModelParams::at(const std::string& name) {
    for (NamedParam& item : items) {
        if (item.name == name) return item.value;
    }
    throw Error("unknown parameter: " + name);
}

std::vector<Tensor> ModelParams::tensors() {
    std::vector<Tensor> out;
    out.reserve(items.size());
    for (NamedParam& item : items) out.push_back(item.value);
    return out;
}

int64_t ModelParams::scalar_count() const {
    int64_t total = 0;
    for (const NamedParam& item : items) total += item.value.numel();
    return total;
}

void ModelParams::zero_grads() {
    for (NamedParam& item : items) item.value.zero_grad();
}

ModelParams build_model(const ArchConfig& cfg, uint64_t init_seed) {
    const auto census = parameter_census(cfg);
    Rng rng(init_seed);
    ModelParams params;
    params.items.reserve(census.size());
    double bound = 0.0;
    for (const auto& [name, shape] : census) {
        if (shape.size() == 4) {
            // Weight; bias reuses its bound, matching the usual fan-in rule.
            const bool transpose = name.rfind("tconv", 0) == 0;
            const int64_t fan_in = transpose ? shape[0] : shape[1] * shape[2] * shape[3];
            bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        }
        params.items.push_back({name, Tensor::uniform(shape, bound, rng, true)});
    }
    return params;
}

Tensor dense_block_forward(const ArchConfig& cfg, const ModelParams& params, int64_t block,
                           const Tensor& input) {
    if (input.rank() != 4 || input.extent(1) != cfg.block_in_channels(block)) {
        throw ShapeError("dense_block_forward: block " + std::to_string(block) + " expects " +
                         std::to_string(cfg.block_in_channels(block)) + " channels, got " +
                         shape_to_string(input.shape()));
    }
    const std::string prefix = "block" + std::to_string(block) + ".conv";
    Tensor current = input;
    for (int64_t l = 0; l < cfg.layers_per_block; ++l) {
        const Tensor layer_in = l == 0 ? current : concat_channels(current, input);
        const std::string base = prefix + std::to_string(l);
        current = relu(conv2d(layer_in, params.at(base + ".weight"), params.at(base + ".bias"),
                              /*padding=*/1, /*stride=*/1));
    }
    return current;
}

Tensor forward(const ArchConfig& cfg, const ModelParams& params, const Tensor& input,
               const TraceFn& trace) {
    validate_arch(cfg);
    if (input.rank() != 4) throw ShapeError("forward: input must be [N,C,H,W]");
    if (input.extent(1) != cfg.in_channels) {
        throw ShapeError("forward: expected " + std::to_string(cfg.in_channels) +
                         " input channels, got " + std::to_string(input.extent(1)));
    }
    const int64_t h = input.extent(2);
    const int64_t w = input.extent(3);
    const int64_t factor = cfg.downsample_factor();
    if (h % factor != 0 || w % factor != 0 || h < factor || w < factor) {
        throw ShapeError("forward: spatial extent " + std::to_string(h) + "x" +
                         std::to_string(w) + " not divisible by " + std::to_string(factor));
    }

    const auto emit = [&](const std::string& stage, const Tensor& t) {
        if (trace) trace(stage, t.shape());
    };
    emit("input", input);

    Tensor current = input;
    std::vector<Tensor> skips(static_cast<size_t>(cfg.depth));
    for (int64_t b = 0; b < cfg.depth; ++b) {
        current = dense_block_forward(cfg, params, b, current);
        emit("block" + std::to_string(b), current);
        skips[static_cast<size_t>(b)] = current;
        if (b < cfg.depth - 1) {
            current = avg_pool2(current);
            emit("pool" + std::to_string(b), current);
        }
    }

    current = relu(conv2d(current, params.at("bottleneck.weight"), params.at("bottleneck.bias"),
                          /*padding=*/1, /*stride=*/1));
    emit("bottleneck", current);

    for (int64_t t = 0; t < cfg.depth - 1; ++t) {
        const Tensor& skip = skips[static_cast<size_t>(cfg.depth - 1 - t)];
        current = concat_channels(current, skip);
        emit("concat" + std::to_string(t), current);
        const std::string base = "tconv" + std::to_string(t);
        current = relu(transpose_conv2d(current, params.at(base + ".weight"),
                                        params.at(base + ".bias"), /*stride=*/2));
        emit("tconv" + std::to_string(t), current);
    }

    current = conv2d(current, params.at("head.weight"), params.at("head.bias"),
                     /*padding=*/0, /*stride=*/1);
    emit("head", current);
    return current;
}

Tensor predict(const ArchConfig& cfg, const ModelParams& params, const Tensor& sample_input,
               const RoadMasks* masks) {
    if (sample_input.rank() != 3) {
        throw ShapeError("predict: sample input must be [C,H,W]");
    }
    const int64_t c = sample_input.extent(0);
    const int64_t h = sample_input.extent(1);
    const int64_t w = sample_input.extent(2);

    Tensor batched = Tensor::from_vector(
        std::vector<double>(sample_input.data().begin(), sample_input.data().end()),
        {1, c, h, w});

    const int64_t factor = cfg.downsample_factor();
    const int64_t padded_h = (h + factor - 1) / factor * factor;
    const int64_t padded_w = (w + factor - 1) / factor * factor;
    if (padded_h != h || padded_w != w) {
        batched = pad_spatial(batched, padded_h - h, padded_w - w);
    }

    Tensor out = forward(cfg, params, batched);
    if (padded_h != h || padded_w != w) {
        out = crop_spatial(out, h, w);
    }

    Tensor clamped = clamp01(out);
    Tensor result = Tensor::from_vector(
        std::vector<double>(clamped.data().begin(), clamped.data().end()),
        {cfg.out_channels, h, w});
    if (masks != nullptr) {
        result = apply_masks(result, *masks);
    }
    return result;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.magic("GFCK");
    w.u16(kCheckpointFormatVersion);
    w.u32(static_cast<uint32_t>(params.items.size()));
    for (const NamedParam& item : params.items) {
        if (item.name.size() > UINT16_MAX) throw ExtentError("parameter name too long");
        w.u16(static_cast<uint16_t>(item.name.size()));
        w.bytes(item.name.data(), item.name.size());
        const Shape& shape = item.value.shape();
        if (shape.size() > UINT8_MAX) throw ExtentError("parameter rank too large");
        w.u8(static_cast<uint8_t>(shape.size()));
        for (int64_t e : shape) {
            if (e < 0 || e > UINT32_MAX) throw ExtentError("parameter extent out of range");
            w.u32(static_cast<uint32_t>(e));
        }
        for (double v : item.value.data()) w.f32(static_cast<float>(v));
    }
    w.close();
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic("GFCK", "checkpoint");
    const uint16_t version = r.u16();
    if (version != kCheckpointFormatVersion) {
        throw IoError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
    }
    const uint32_t count = r.u32();
    ModelParams params;
    params.items.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        std::string name(name_len, '\0');
        if (name_len > 0) r.bytes(name.data(), name_len);
        const uint8_t rank = r.u8();
        Shape shape(rank);
        uint64_t numel = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            const uint32_t e = r.u32();
            shape[d] = e;
            if (e != 0 && numel > (1ull << 32) / e) {
                throw ExtentError(path.string() + ": parameter extents overflow");
            }
            numel *= e;
        }
        std::vector<double> values(numel);
        for (uint64_t j = 0; j < numel; ++j) values[j] = static_cast<double>(r.f32());
        params.items.push_back({std::move(name),
                                Tensor::from_vector(std::move(values), std::move(shape), true)});
    }
    if (!r.at_end()) {
        throw TruncatedError(path.string() + ": trailing bytes after payload");
    }
    return params;
}

void validate_params(const ModelParams& params, const ArchConfig& cfg) {
    const auto census = parameter_census(cfg);
    if (census.size() != params.items.size()) {
        throw ShapeError("checkpoint has " + std::to_string(params.items.size()) +
                         " arrays, architecture expects " + std::to_string(census.size()));
    }
    for (size_t i = 0; i < census.size(); ++i) {
        if (params.items[i].name != census[i].first) {
            throw ShapeError("checkpoint parameter " + std::to_string(i) + " is '" +
                             params.items[i].name + "', expected '" + census[i].first + "'");
        }
        if (params.items[i].value.shape() != census[i].second) {
            throw ShapeError("checkpoint parameter '" + params.items[i].name + "' has shape " +
                             shape_to_string(params.items[i].value.shape()) + ", expected " +
                             shape_to_string(census[i].second));
        }
    }
}

}  // namespace gridflow
