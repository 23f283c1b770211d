#pragma once

#include "sinterp/image.hpp"
#include "sinterp/io.hpp"
#include "sinterp/metrics.hpp"
#include "sinterp/noise.hpp"
#include "sinterp/recon.hpp"
#include "sinterp/unet.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace sinterp {

// ---- normalization ----

struct Normalized
{
    Sinogram sinogram;
    double scale; // the original maximum
};

/// Divides by the sinogram maximum. ValidationError on an all-zero sinogram.
Normalized normalize(const Sinogram& sino);
Sinogram denormalize(const Sinogram& sino, double scale);

// ---- configuration ----

/// Flat key = value file, '#' starts a comment. Keys:
///   manifest, val_manifest, split, batch_size, epochs, learning_rate, seed,
///   loss (mse), normalization (per_sinogram_max), base_channels,
///   bottleneck_channels, checkpoint, history, max_steps, deterministic,
///   jobs, val_metrics, noise
/// Relative paths resolve against the config file's directory.
struct TrainConfig
{
    std::filesystem::path manifest;
    std::filesystem::path val_manifest; // empty: split `manifest`
    double split = 0.9;
    std::int64_t batch_size = 16;
    std::int64_t epochs = 10;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::string loss = "mse";
    NormalizationMode normalization = NormalizationMode::PerSinogramMax;
    std::int64_t base_channels = 32;
    std::int64_t bottleneck_channels = 0; // 0: 16 x base_channels
    std::filesystem::path checkpoint = "model.ckpt";
    std::filesystem::path history = "history.json";
    std::int64_t max_steps = 0; // 0: no limit
    bool deterministic = false;
    int jobs = 0; // 0: OpenMP default
    bool val_metrics = true;
    std::string noise = "mixed"; // low|medium|high keeps only that level

    void validate() const;
};

TrainConfig parse_train_config(const std::string& text, const std::filesystem::path& base_dir = {});
TrainConfig load_train_config(const std::filesystem::path& path);

// ---- data ----

/// One (noisy sparse-view, clean dense-view) pair scaled by the input's
/// maximum: the target is divided by the same constant, so a model output
/// times `scale` is back in intensity units.
struct TrainPair
{
    std::vector<float> input;
    std::vector<float> target;
    double scale = 1.0;
    std::int64_t in_angles = 0;
    std::int64_t out_angles = 0;
    std::int64_t bins = 0;
};

TrainPair make_train_pair(const Sinogram& input, const Sinogram& target);

/// Loads every entry; ValidationError on an empty manifest or on pairs whose
/// shapes disagree with each other or with out_angles = 4 x in_angles.
std::vector<TrainPair> load_pairs(const std::vector<ManifestEntry>& entries);

// ---- training ----

struct EpochRecord
{
    std::int64_t epoch = 0;
    std::int64_t steps = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<MetricsReport> val_metrics;
    double seconds = 0.0;
};

struct TrainHistory
{
    std::vector<EpochRecord> epochs;
    std::vector<double> step_losses;
    std::int64_t best_epoch = 0;
    double best_val_loss = 0.0;
    double seconds = 0.0;
};

nlohmann::ordered_json to_json(const TrainHistory& history);

struct TrainResult
{
    UNet model; // weights of the best epoch
    TrainHistory history;
};

/// Adam on mean-squared error between forward(input) and target. The train
/// order is reshuffled every epoch from derive_seed(seed, Shuffle, epoch).
/// The best epoch is chosen by validation loss, or by train loss when `val` is
/// empty. `on_improve` runs whenever a new best epoch is found.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainPair>& train_set, const std::vector<TrainPair>& val,
                  std::ostream* log = nullptr, const std::function<void(const UNet&)>& on_improve = {});

/// File-driven run: reads the manifest(s), splits, trains, writes the
/// checkpoint whenever validation improves and the history JSON at the end.
TrainResult train(const TrainConfig& cfg, std::ostream* log = nullptr);

/// Mean loss of `model` over pairs without recording a graph.
double mean_loss(const UNet& model, const std::vector<TrainPair>& pairs, std::int64_t batch_size = 16);

// ---- inference and evaluation ----

/// Dense-view estimate from a sparse-view sinogram: normalize, run the model
/// (negatives clamped), scale back. Geometry carries over with 4x the views.
Sinogram predict(const UNet& model, const Sinogram& input);
std::vector<Sinogram> predict(const UNet& model, const std::vector<Sinogram>& inputs, std::int64_t batch_size = 16);

/// Comparison method: each dense view copies the angularly nearest sparse
/// view (ties to the earlier one, wrapping around the full range).
Sinogram nearest_angle_upsample(const Sinogram& input, std::int64_t factor = 4);

using Predictor = std::function<std::vector<Sinogram>(const std::vector<Sinogram>&)>;

struct EvalOptions
{
    ReconConfig recon;
    bool image_space = true;
    std::int64_t limit = 0; // 0: every matching entry
};

/// Aggregates (means) for one noise level.
///   model_sinogram    predictor output vs clean dense target
///   baseline_sinogram nearest_angle_upsample(input) vs target
///   model_image       OSEM(predictor output) vs phantom
///   baseline_image    OSEM(noisy sparse input) vs phantom
struct EvaluationRow
{
    std::string noise;
    std::int64_t pairs = 0;
    MetricsReport model_sinogram;
    MetricsReport baseline_sinogram;
    MetricsReport model_image;
    MetricsReport baseline_image;
};

nlohmann::ordered_json to_json(const EvaluationRow& row);

/// Entries whose noise field equals `noise` (all entries when empty).
EvaluationRow evaluate(const Predictor& predictor, const std::vector<ManifestEntry>& entries, const std::string& noise,
                       const EvalOptions& options = {});
EvaluationRow evaluate(const UNet& model, const std::vector<ManifestEntry>& entries, NoiseLevel noise,
                       const EvalOptions& options = {});

} // namespace sinterp
