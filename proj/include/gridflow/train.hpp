#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gridflow/model.hpp"
#include "gridflow/roadmask.hpp"
#include "gridflow/sample.hpp"
#include "gridflow/synth.hpp"

namespace gridflow {

struct TrainConfig {
    double learning_rate = 3e-4;
    int64_t pretrain_epochs = 5;
    int64_t finetune_epochs = 1;
    int64_t batch_size = 4;
    uint64_t seed = 0;
    ArchConfig arch;
    bool use_mask = false;
    bool use_two_stage = false;
    // Window-start strides when assembling sample sets; 1 keeps every window.
    int64_t train_sample_stride = 1;
    int64_t finetune_sample_stride = 1;
    int64_t eval_sample_stride = 1;
};

// Lazy view over (movie, window start) pairs; samples are materialized per
// batch so a scenario never has to hold its tensors in memory at once.
class SampleSet {
public:
    SampleSet() = default;
    SampleSet(std::shared_ptr<const std::vector<Movie>> movies, StaticMap static_map,
              const std::vector<size_t>& movie_indices, int64_t stride);

    size_t size() const { return refs_.size(); }
    bool empty() const { return refs_.empty(); }
    Sample at(size_t i) const;
    int64_t height() const { return static_map_.height; }
    int64_t width() const { return static_map_.width; }

private:
    struct Ref {
        size_t movie;
        int64_t t_start;
    };
    std::shared_ptr<const std::vector<Movie>> movies_;
    StaticMap static_map_;
    std::vector<Ref> refs_;
};

struct EpochLoss {
    int64_t epoch = 0;
    std::string split;
    double mean_loss = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLoss> curve;
};

// Adam on mse_loss over seeded shuffled batches, starting from a fresh
// deterministic initialization. 0 epochs returns the initialization.
TrainResult pretrain(const TrainConfig& cfg, const SampleSet& train_samples);

// Continues training on validation-regime samples with a fresh optimizer
// state and the same learning rate.
TrainResult finetune(const TrainConfig& cfg, ModelParams params,
                     const SampleSet& validation_samples);

struct EvalReport {
    double overall_mse = 0.0;
    std::array<double, kOutputFrames> per_timestamp_mse{};
    std::array<double, channels::output_count> per_channel_mse{};
    int64_t n_samples = 0;
};

// MSE of clamped (and optionally masked) predictions on the [0,1] scale,
// with per-timestamp and per-channel breakdowns.
EvalReport evaluate(const ArchConfig& arch, const ModelParams& params,
                    const SampleSet& test_samples, const RoadMasks* masks = nullptr);

// Same reduction over an arbitrary predictor; used for baselines and tests.
EvalReport evaluate_predictor(const std::function<Tensor(const Sample&)>& predictor,
                              const SampleSet& test_samples);

// Repeats the last input frame's traffic channels for all six horizons.
Tensor persistence_baseline(const Sample& sample);

// Trains through checkpoint files: pretrain, save, reload, then optionally
// fine-tune, save, reload. Composed CLI runs and the ablation runner share
// this path, so their artifacts match bitwise.
TrainResult train_pipeline(const TrainConfig& cfg, const SampleSet& train,
                           const SampleSet& validation,
                           const std::filesystem::path& pretrain_checkpoint,
                           const std::filesystem::path& final_checkpoint, bool two_stage);

struct AblationRow {
    std::string label;
    bool use_mask = false;
    bool use_two_stage = false;
    EvalReport report;
};

struct AblationTable {
    std::vector<AblationRow> rows;  // baseline, +mask, +two-stage, final
    std::vector<EpochLoss> curve;
};

// The four-configuration study: {mask off/on} x {two-stage off/on} sharing
// one seed. Mask application is evaluation-time post-processing, so the two
// trainings (pretrained, fine-tuned) cover all four rows.
AblationTable run_ablation(const TrainConfig& base_cfg, const SampleSet& train,
                           const SampleSet& validation, const SampleSet& test,
                           const RoadMasks& masks,
                           const std::filesystem::path& pretrain_checkpoint,
                           const std::filesystem::path& final_checkpoint);

std::string format_ablation_text(const AblationTable& table);
std::string format_ablation_csv(const AblationTable& table);
void write_text_file(const std::string& content, const std::filesystem::path& path);

std::string format_loss_curve_csv(const std::vector<EpochLoss>& curve);
std::string format_eval_csv(const EvalReport& report);
std::string format_eval_text(const EvalReport& report);

// Per horizon: ground truth, prediction and absolute difference heatmaps
// (channel means) as text PGM files named
// {sample_id}_{minutes}min_{gt|pred|diff}.pgm. Returns the written paths.
std::vector<std::filesystem::path> emit_visual_report(const ArchConfig& arch,
                                                      const ModelParams& params,
                                                      const Sample& sample,
                                                      const RoadMasks* masks,
                                                      const std::filesystem::path& out_dir);

// Same emission for an externally produced prediction [48,H,W].
std::vector<std::filesystem::path> emit_visual_report(const Sample& sample,
                                                      const Tensor& prediction,
                                                      const std::filesystem::path& out_dir);

}  // namespace gridflow
