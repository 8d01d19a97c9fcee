#include "gridflow/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridflow/adam.hpp"
#include "gridflow/rng.hpp"

namespace gridflow {

namespace {

constexpr uint64_t kInitStream = 0x696e6974;       // init
constexpr uint64_t kShuffleStream = 0x73686662;    // pretrain shuffle
constexpr uint64_t kFinetuneStream = 0x66747368;   // finetune shuffle

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.8e", v);
    return buf;
}

void fisher_yates(std::vector<size_t>& order, Rng& rng) {
    for (size_t i = order.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_index(i));
        std::swap(order[i - 1], order[j]);
    }
}

struct Batch {
    Tensor input;   // [n,109,H,W]
    Tensor target;  // [n,48,H,W]
};

Batch assemble_batch(const SampleSet& set, const std::vector<size_t>& order, size_t from,
                     size_t to) {
    const size_t n = to - from;
    const Sample first = set.at(order[from]);
    const int64_t h = first.input.extent(1);
    const int64_t w = first.input.extent(2);
    std::vector<double> input(static_cast<size_t>(n) *
                              static_cast<size_t>(kSampleInputChannels * h * w));
    std::vector<double> target(static_cast<size_t>(n) *
                               static_cast<size_t>(kSampleTargetChannels * h * w));
    for (size_t i = 0; i < n; ++i) {
        const Sample sample = i == 0 ? first : set.at(order[from + i]);
        std::copy(sample.input.data().begin(), sample.input.data().end(),
                  input.begin() + static_cast<ptrdiff_t>(i * sample.input.data().size()));
        std::copy(sample.target.data().begin(), sample.target.data().end(),
                  target.begin() + static_cast<ptrdiff_t>(i * sample.target.data().size()));
    }
    Batch batch;
    batch.input = Tensor::from_vector(std::move(input),
                                      {static_cast<int64_t>(n), kSampleInputChannels, h, w});
    batch.target = Tensor::from_vector(std::move(target),
                                       {static_cast<int64_t>(n), kSampleTargetChannels, h, w});
    return batch;
}

std::vector<EpochLoss> run_epochs(const TrainConfig& cfg, ModelParams& params,
                                  const SampleSet& samples, int64_t epochs,
                                  const std::string& split, uint64_t shuffle_stream) {
    std::vector<EpochLoss> curve;
    if (epochs == 0) return curve;
    if (samples.empty()) throw Error(split + ": empty sample set");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");

    auto tensors = params.tensors();
    AdamState adam = make_adam_state(tensors, cfg.learning_rate);

    std::vector<size_t> order(samples.size());
    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        std::iota(order.begin(), order.end(), size_t{0});
        Rng rng(derive_seed(cfg.seed, shuffle_stream, static_cast<uint64_t>(epoch)));
        fisher_yates(order, rng);

        double loss_sum = 0.0;
        int64_t sample_sum = 0;
        const size_t batch_count =
            (order.size() + static_cast<size_t>(cfg.batch_size) - 1) /
            static_cast<size_t>(cfg.batch_size);
        for (size_t b = 0; b < batch_count; ++b) {
            const size_t from = b * static_cast<size_t>(cfg.batch_size);
            const size_t to = std::min(order.size(), from + static_cast<size_t>(cfg.batch_size));
            try {
                Batch batch = assemble_batch(samples, order, from, to);
                Tensor out = forward(cfg.arch, params, batch.input);
                Tensor loss = mse_loss(out, batch.target);
                params.zero_grads();
                loss.backward();
                adam_step(tensors, adam);
                loss_sum += loss.item() * static_cast<double>(to - from);
                sample_sum += static_cast<int64_t>(to - from);
            } catch (const NonFiniteError& e) {
                throw TrainingError(split + " aborted: non-finite loss at epoch " +
                                    std::to_string(epoch) + ", batch " + std::to_string(b) +
                                    " (" + e.what() + ")");
            }
        }
        curve.push_back({epoch, split, loss_sum / static_cast<double>(sample_sum)});
    }
    return curve;
}

}  // namespace

SampleSet::SampleSet(std::shared_ptr<const std::vector<Movie>> movies, StaticMap static_map,
                     const std::vector<size_t>& movie_indices, int64_t stride)
    : movies_(std::move(movies)), static_map_(std::move(static_map)) {
    if (stride < 1) throw ConfigError("sample stride must be >= 1");
    for (size_t m : movie_indices) {
        const int64_t count = sample_count((*movies_)[m].frame_count);
        for (int64_t t = 0; t < count; t += stride) refs_.push_back({m, t});
    }
}

Sample SampleSet::at(size_t i) const {
    const Ref& ref = refs_.at(i);
    return make_sample((*movies_)[ref.movie], static_map_, ref.t_start);
}

TrainResult pretrain(const TrainConfig& cfg, const SampleSet& train_samples) {
    if (train_samples.empty()) throw Error("pretrain: empty training set");
    TrainResult result;
    result.params = build_model(cfg.arch, derive_seed(cfg.seed, kInitStream));
    result.curve = run_epochs(cfg, result.params, train_samples, cfg.pretrain_epochs, "pretrain",
                              kShuffleStream);
    return result;
}

TrainResult finetune(const TrainConfig& cfg, ModelParams params,
                     const SampleSet& validation_samples) {
    TrainResult result;
    result.params = std::move(params);
    result.curve = run_epochs(cfg, result.params, validation_samples, cfg.finetune_epochs,
                              "finetune", kFinetuneStream);
    return result;
}

EvalReport evaluate_predictor(const std::function<Tensor(const Sample&)>& predictor,
                              const SampleSet& test_samples) {
    if (test_samples.empty()) throw Error("evaluate: empty test set");

    std::array<double, kOutputFrames> ts_sse{};
    std::array<double, channels::output_count> ch_sse{};
    int64_t plane = 0;
    for (size_t i = 0; i < test_samples.size(); ++i) {
        const Sample sample = test_samples.at(i);
        const Tensor pred = predictor(sample);
        if (pred.shape() != sample.target.shape()) {
            throw ShapeError("evaluate: prediction shape " + shape_to_string(pred.shape()) +
                             " does not match target " +
                             shape_to_string(sample.target.shape()));
        }
        plane = sample.target.extent(1) * sample.target.extent(2);
        const auto p = pred.data();
        const auto t = sample.target.data();
        for (int64_t k = 0; k < kOutputFrames; ++k) {
            for (int64_t c = 0; c < channels::output_count; ++c) {
                const int64_t base = (k * channels::output_count + c) * plane;
                double acc = 0.0;
                for (int64_t j = 0; j < plane; ++j) {
                    const double diff = p[static_cast<size_t>(base + j)] -
                                        t[static_cast<size_t>(base + j)];
                    acc += diff * diff;
                }
                ts_sse[static_cast<size_t>(k)] += acc;
                ch_sse[static_cast<size_t>(c)] += acc;
            }
        }
    }

    EvalReport report;
    report.n_samples = static_cast<int64_t>(test_samples.size());
    const double n = static_cast<double>(report.n_samples);
    double total_sse = 0.0;
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        total_sse += ts_sse[static_cast<size_t>(k)];
        report.per_timestamp_mse[static_cast<size_t>(k)] =
            ts_sse[static_cast<size_t>(k)] /
            (n * static_cast<double>(channels::output_count * plane));
    }
    for (int64_t c = 0; c < channels::output_count; ++c) {
        report.per_channel_mse[static_cast<size_t>(c)] =
            ch_sse[static_cast<size_t>(c)] / (n * static_cast<double>(kOutputFrames * plane));
    }
    report.overall_mse =
        total_sse / (n * static_cast<double>(kSampleTargetChannels * plane));
    return report;
}

EvalReport evaluate(const ArchConfig& arch, const ModelParams& params,
                    const SampleSet& test_samples, const RoadMasks* masks) {
    return evaluate_predictor(
        [&](const Sample& sample) { return predict(arch, params, sample.input, masks); },
        test_samples);
}

Tensor persistence_baseline(const Sample& sample) {
    const int64_t h = sample.input.extent(1);
    const int64_t w = sample.input.extent(2);
    const int64_t plane = h * w;
    const int64_t last_frame_base = (kInputFrames - 1) * channels::input_count * plane;
    const auto in = sample.input.data();
    std::vector<double> out(static_cast<size_t>(kSampleTargetChannels * plane));
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        for (int64_t c = 0; c < channels::output_count; ++c) {
            const double* src = in.data() + last_frame_base + c * plane;
            double* dst = out.data() + (k * channels::output_count + c) * plane;
            std::copy(src, src + plane, dst);
        }
    }
    return Tensor::from_vector(std::move(out), {kSampleTargetChannels, h, w});
}

TrainResult train_pipeline(const TrainConfig& cfg, const SampleSet& train,
                           const SampleSet& validation,
                           const std::filesystem::path& pretrain_checkpoint,
                           const std::filesystem::path& final_checkpoint, bool two_stage) {
    TrainResult pre = pretrain(cfg, train);
    save_checkpoint(pre.params, pretrain_checkpoint);

    TrainResult result;
    result.curve = std::move(pre.curve);
    // Reload so downstream stages see exactly what any later run would read.
    ModelParams params = load_checkpoint(pretrain_checkpoint);
    if (two_stage) {
        TrainResult ft = finetune(cfg, std::move(params), validation);
        for (const EpochLoss& e : ft.curve) result.curve.push_back(e);
        save_checkpoint(ft.params, final_checkpoint);
    } else {
        save_checkpoint(params, final_checkpoint);
    }
    result.params = load_checkpoint(final_checkpoint);
    return result;
}

AblationTable run_ablation(const TrainConfig& base_cfg, const SampleSet& train,
                           const SampleSet& validation, const SampleSet& test,
                           const RoadMasks& masks,
                           const std::filesystem::path& pretrain_checkpoint,
                           const std::filesystem::path& final_checkpoint) {
    AblationTable table;
    TrainResult full = train_pipeline(base_cfg, train, validation, pretrain_checkpoint,
                                      final_checkpoint, /*two_stage=*/true);
    table.curve = full.curve;

    const ModelParams pretrained = load_checkpoint(pretrain_checkpoint);
    const ModelParams finetuned = load_checkpoint(final_checkpoint);

    table.rows.push_back(
        {"U-Net", false, false, evaluate(base_cfg.arch, pretrained, test, nullptr)});
    table.rows.push_back(
        {"U-Net + Roadmap mask", true, false, evaluate(base_cfg.arch, pretrained, test, &masks)});
    table.rows.push_back({"U-Net + Two-stage training", false, true,
                          evaluate(base_cfg.arch, finetuned, test, nullptr)});
    table.rows.push_back(
        {"Final model", true, true, evaluate(base_cfg.arch, finetuned, test, &masks)});
    return table;
}

std::string format_ablation_text(const AblationTable& table) {
    std::ostringstream os;
    os << "Model                          MSE\n";
    os << "---------------------------------------------\n";
    for (const AblationRow& row : table.rows) {
        std::string label = row.label;
        label.resize(30, ' ');
        os << label << " " << format_short(row.report.overall_mse) << "\n";
    }
    os << "\n";
    os << "note: values are for this synthetic desk-scale scenario on the\n";
    os << "normalized 0-1 scale. Reference results on the original full-scale\n";
    os << "competition data (0.00119438 / 0.00117991 / 0.00117037 / 0.00116868)\n";
    os << "are not reproducible here and are not comparable.\n";
    return os.str();
}

std::string format_ablation_csv(const AblationTable& table) {
    std::ostringstream os;
    os << "row_label,use_mask,use_two_stage,overall_mse,mse_5min,mse_10min,mse_15min,"
          "mse_30min,mse_45min,mse_60min\n";
    for (const AblationRow& row : table.rows) {
        os << row.label << "," << (row.use_mask ? 1 : 0) << "," << (row.use_two_stage ? 1 : 0)
           << "," << format_full(row.report.overall_mse);
        for (double v : row.report.per_timestamp_mse) os << "," << format_full(v);
        os << "\n";
    }
    return os.str();
}

void write_text_file(const std::string& content, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string format_loss_curve_csv(const std::vector<EpochLoss>& curve) {
    std::ostringstream os;
    os << "epoch,split,mean_loss\n";
    for (const EpochLoss& e : curve) {
        os << e.epoch << "," << e.split << "," << format_full(e.mean_loss) << "\n";
    }
    return os.str();
}

std::string format_eval_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "overall_mse,mse_5min,mse_10min,mse_15min,mse_30min,mse_45min,mse_60min,"
          "ch0,ch1,ch2,ch3,ch4,ch5,ch6,ch7,n_samples\n";
    os << format_full(report.overall_mse);
    for (double v : report.per_timestamp_mse) os << "," << format_full(v);
    for (double v : report.per_channel_mse) os << "," << format_full(v);
    os << "," << report.n_samples << "\n";
    return os.str();
}

std::string format_eval_text(const EvalReport& report) {
    static const int minutes[kOutputFrames] = {5, 10, 15, 30, 45, 60};
    std::ostringstream os;
    os << "samples: " << report.n_samples << "\n";
    os << "overall mse: " << format_short(report.overall_mse) << "\n";
    for (size_t k = 0; k < kOutputFrames; ++k) {
        os << "  " << minutes[k] << " min: " << format_short(report.per_timestamp_mse[k]) << "\n";
    }
    for (size_t c = 0; c < channels::output_count; ++c) {
        os << "  channel " << c << " (" << channels::direction_name(static_cast<int64_t>(c / 2))
           << (c % 2 == 0 ? " volume" : " speed")
           << "): " << format_short(report.per_channel_mse[c]) << "\n";
    }
    return os.str();
}

namespace {

void write_pgm(const std::vector<double>& values01, int64_t height, int64_t width,
               const std::filesystem::path& path) {
    std::ostringstream os;
    os << "P2\n" << width << " " << height << "\n255\n";
    for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
            const double v = std::clamp(values01[static_cast<size_t>(y * width + x)], 0.0, 1.0);
            if (x) os << " ";
            os << static_cast<int>(std::llround(v * 255.0));
        }
        os << "\n";
    }
    write_text_file(os.str(), path);
}

// Mean over the 8 traffic channels of one horizon -> one grayscale panel.
std::vector<double> horizon_panel(std::span<const double> data, int64_t k, int64_t plane) {
    std::vector<double> panel(static_cast<size_t>(plane), 0.0);
    for (int64_t c = 0; c < channels::output_count; ++c) {
        const double* src = data.data() + (k * channels::output_count + c) * plane;
        for (int64_t i = 0; i < plane; ++i) panel[static_cast<size_t>(i)] += src[i];
    }
    for (double& v : panel) v /= static_cast<double>(channels::output_count);
    return panel;
}

}  // namespace

std::vector<std::filesystem::path> emit_visual_report(const ArchConfig& arch,
                                                      const ModelParams& params,
                                                      const Sample& sample,
                                                      const RoadMasks* masks,
                                                      const std::filesystem::path& out_dir) {
    return emit_visual_report(sample, predict(arch, params, sample.input, masks), out_dir);
}

std::vector<std::filesystem::path> emit_visual_report(const Sample& sample,
                                                      const Tensor& pred,
                                                      const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const int64_t h = sample.target.extent(1);
    const int64_t w = sample.target.extent(2);
    const int64_t plane = h * w;
    static const int minutes[kOutputFrames] = {5, 10, 15, 30, 45, 60};

    char sample_id[128];
    std::snprintf(sample_id, sizeof(sample_id), "%s_d%03d_t%03lld", sample.city.c_str(),
                  sample.day_index, static_cast<long long>(sample.t_start));

    std::vector<std::filesystem::path> written;
    for (int64_t k = 0; k < kOutputFrames; ++k) {
        const auto gt_panel = horizon_panel(sample.target.data(), k, plane);
        const auto pred_panel = horizon_panel(pred.data(), k, plane);
        std::vector<double> diff_panel(static_cast<size_t>(plane));
        for (int64_t i = 0; i < plane; ++i) {
            diff_panel[static_cast<size_t>(i)] =
                std::abs(gt_panel[static_cast<size_t>(i)] - pred_panel[static_cast<size_t>(i)]);
        }
        const std::string stem =
            std::string(sample_id) + "_" + std::to_string(minutes[k]) + "min_";
        const struct {
            const char* tag;
            const std::vector<double>* panel;
        } panels[] = {{"gt", &gt_panel}, {"pred", &pred_panel}, {"diff", &diff_panel}};
        for (const auto& p : panels) {
            const auto path = out_dir / (stem + p.tag + ".pgm");
            write_pgm(*p.panel, h, w, path);
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace gridflow
