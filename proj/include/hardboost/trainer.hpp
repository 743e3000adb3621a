#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hardboost/errors.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/margin.hpp"
#include "hardboost/model.hpp"
#include "hardboost/sgd.hpp"
#include "hardboost/synth.hpp"
#include "hardboost/weighting.hpp"

namespace hardboost {

/// Baseline: one uniformly weighted model.
/// V1: later rounds fine-tune the previous model on every sample, weighted.
/// V2: later rounds fine-tune on the previous model's misclassified samples only.
/// V3: later rounds train from a fresh initialization, weighted.
enum class Variant { Baseline, V1, V2, V3 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

inline constexpr int kMaxRounds = 4;

struct TrainConfig {
    int epochs_per_round = 30;
    int finetune_epochs = -1;  // rounds >= 2 that fine-tune; -1 means epochs_per_round
    std::size_t batch_size = 128;
    SgdConfig sgd;
    double finetune_lr_scale = 1.0;
    MarginParams margin = MarginParams::adaface_like();
    double alpha = 0.1;
    double lambda = 1.0;
    double ema_momentum = 0.99;
    double hardness_epsilon = 1e-6;
    int rounds = 2;  // K
    Variant variant = Variant::V1;
    std::vector<double> betas = {1.0, 0.1, 0.1, 0.1};
    bool renormalize_weights = false;
    std::size_t hidden_width = 64;
    std::size_t hidden_layers = 2;
    std::size_t embed_dim = 16;
    std::uint64_t seed = 1;

    /// Throws ConfigError naming the field.
    void validate() const;
    /// Baseline always runs a single round.
    int effective_rounds() const { return variant == Variant::Baseline ? 1 : rounds; }
};

/// One mini-batch worth of loss inputs.
struct BatchInputs {
    Matrix inputs;                    // N x input_dim
    std::vector<std::size_t> labels;  // N
    std::vector<double> weights;      // d_i, N
    std::vector<double> scales;       // s'_i, N
    MarginParams margin;
};

/// Weighted margin objective of the batch: embed, normalize centers, margin logits, weighted NLL.
double batch_loss(const EmbeddingModel& model, const BatchInputs& batch);

/// Analytic gradient of batch_loss w.r.t. every parameter block (backbone and raw centers).
ModelGradient batch_gradient(const EmbeddingModel& model, const BatchInputs& batch, double* loss = nullptr);

struct EpochMetrics {
    int epoch;
    double loss;  // sample-weighted mean of batch losses
    double lr;
};

struct RoundRecord {
    int round = 1;
    std::filesystem::path checkpoint;  // empty when not persisted
    std::filesystem::path weight_table;
    double final_loss = 0.0;
    std::vector<EpochMetrics> metrics;
    double wall_seconds = 0.0;  // not persisted
};

/// Everything that parameterizes one round of training beyond the shared config.
struct RoundPlan {
    int round = 1;
    int epochs = 30;
    SgdConfig sgd;
    std::vector<std::size_t> sample_ids;  // subset to train on, in id order
    bool weighted = true;  // false: d = 1 and s' = s without consulting the table
};

struct RoundResult {
    EmbeddingModel model;
    ModelGradient momentum;
    HardnessStats stats;
    RoundRecord record;
};

/// Non-finite loss during training. Carries the location.
class TrainingDivergedError : public NumericError {
public:
    TrainingDivergedError(const std::string& what, int epoch, std::size_t batch, std::vector<std::size_t> sample_ids)
        : NumericError(what), epoch(epoch), batch(batch), sample_ids(std::move(sample_ids)) {}
    int epoch;
    std::size_t batch;
    std::vector<std::size_t> sample_ids;
};

/// V2 found nothing to fine-tune on.
class EmptyHardSetError : public DataError {
public:
    using DataError::DataError;
};

/// Runs plan.epochs of shuffled mini-batch SGD from `init`. Per batch: embed,
/// update the hardness statistics with the batch weights, adapt each sample's
/// scale, take one step on the weighted loss.
RoundResult train_round(const EmbeddingModel& init, const TrainingSet& data, const WeightTable& table,
                        const TrainConfig& config, const RoundPlan& plan);

/// Softmax probability of the true class for every sample (uniform scale, margin applied).
std::vector<double> compute_dataset_probs(const EmbeddingModel& model, const TrainingSet& data,
                                          const MarginParams& margin);

/// Samples whose nearest center by plain cosine is not their label (ties to the lower class id).
std::vector<std::size_t> misclassified_samples(const EmbeddingModel& model, const TrainingSet& data);

struct BoostResult {
    Ensemble ensemble;
    std::vector<RoundRecord> records;
    std::vector<WeightTable> tables;  // table used to train round k at index k-1
};

/// Called after each completed round, e.g. for progress output.
using RoundObserver = std::function<void(const RoundRecord&)>;

struct RunOptions {
    std::optional<std::filesystem::path> run_dir;  // persist rounds + manifest
    bool resume = false;                           // reuse completed rounds found in run_dir
    RoundObserver on_round;
};

/// K-round boosting pipeline.
BoostResult boost_train(const TrainingSet& data, const TrainConfig& config, const RunOptions& options = {});

/// Persisted state of one completed round.
struct RoundState {
    int round = 1;
    EmbeddingModel model;
    ModelGradient momentum;
    WeightTable table;
    WeightTableMeta meta;
    std::vector<EpochMetrics> metrics;
};

/// Writes round_<k>/{checkpoint.bin, weights.csv, weights.csv.meta, metrics.csv}.
void save_round(const std::filesystem::path& run_dir, const RoundState& state);
RoundState load_round(const std::filesystem::path& run_dir, int round);

struct EnsembleManifest {
    Variant variant = Variant::V1;
    std::vector<std::filesystem::path> checkpoints;  // relative to the run dir
    std::vector<double> betas;
};

inline constexpr int kManifestVersion = 1;

void save_manifest(const std::filesystem::path& run_dir, const EnsembleManifest& manifest);
EnsembleManifest load_manifest(const std::filesystem::path& run_dir);

/// Loads every checkpoint of the manifest; `betas_override` replaces the stored betas.
Ensemble load_ensemble(const std::filesystem::path& run_dir,
                       const std::optional<std::vector<double>>& betas_override = std::nullopt);

}  // namespace hardboost
