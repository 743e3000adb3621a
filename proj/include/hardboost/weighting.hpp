#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hardboost {

/// Per-sample boosting weights for one round, indexed by sample id.
struct WeightTable {
    int round = 1;
    std::vector<double> weights;
    double alpha = 0.1;

    std::size_t size() const noexcept { return weights.size(); }
    friend bool operator==(const WeightTable&, const WeightTable&) = default;
};

/// Moving statistics of the weights seen during training, used to turn a raw
/// weight into a centred hardness score.
struct HardnessStats {
    double running_mean = 0.0;
    double running_std = 0.0;
    double ema_momentum = 0.99;
    double lambda = 1.0;
    double epsilon = 1e-6;
    bool initialized = false;  // first batch seeds the averages directly

    friend bool operator==(const HardnessStats&, const HardnessStats&) = default;
};

WeightTable init_table(std::size_t num_samples, double alpha);

/// d_i <- d_i * p_i^(-alpha) for every sample; returns the table for the next round.
/// `probs` must be indexed by sample id and cover the table exactly.
WeightTable update_weights(const WeightTable& table, std::span<const double> probs);

/// Rescales the weights so they sum to the sample count. Not applied by default.
void renormalize(WeightTable& table);

/// EMA of batch mean and population std. The first call on a fresh stats
/// object adopts the batch values as-is.
HardnessStats update_running_stats(const HardnessStats& stats, std::span<const double> batch_weights);

/// lambda * (d - mean) / max(std, epsilon)
double normalize_hardness(double weight, const HardnessStats& stats);

inline constexpr double kScaleClip = 0.33;

/// s - clip(d_hat, -0.33, 0.33) * s
double adapt_scale(double base_scale, double d_hat);

struct WeightTableMeta {
    int round = 1;
    double alpha = 0.1;
    double lambda = 1.0;
    double ema_momentum = 0.99;
};

/// CSV `sample_id,weight` with 17 significant digits plus a `<path>.meta`
/// key/value sidecar (round, alpha, lambda, ema_momentum).
void save_weight_table(const std::filesystem::path& path, const WeightTable& table, const WeightTableMeta& meta);
WeightTable load_weight_table(const std::filesystem::path& path, WeightTableMeta* meta = nullptr);

}  // namespace hardboost
