#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hardboost/config.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/margin.hpp"
#include "hardboost/synth.hpp"
#include "hardboost/trainer.hpp"

namespace hardboost {

using Setting = std::pair<std::string, std::string>;
using FlatReport = std::vector<std::pair<std::string, double>>;

/// One swept key and its values, parsed from `key=v1,v2,...`.
struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

SweepAxis parse_sweep(std::string_view spec);

/// Cartesian product of the axes, first axis varying slowest. No axes yields one empty point.
std::vector<std::vector<Setting>> expand_sweep(std::span<const SweepAxis> axes);

/// `key=value` pairs joined by spaces; "base" for an empty point.
std::string point_label(std::span<const Setting> settings);

/// Generates the dataset from config.gen unless one is given, trains, and evaluates.
EvalReport run_experiment(const RunConfig& config, const Dataset* dataset = nullptr);

struct SeedRun {
    std::uint64_t seed = 0;
    std::optional<FlatReport> metrics;  // empty when the run failed
    std::string error;
    int exit_code = 0;
};

struct AblationRow {
    std::vector<Setting> settings;
    std::vector<SeedRun> runs;
    FlatReport median;  // per-metric median over the successful runs; empty if none succeeded

    std::size_t failures() const;
};

struct AblationTable {
    std::vector<std::string> keys;  // swept keys, in axis order
    std::vector<AblationRow> rows;
};

struct AblationOptions {
    std::vector<std::uint64_t> seeds = {1};
    const Dataset* dataset = nullptr;  // fixed dataset; otherwise generated per seed
    unsigned jobs = 1;                 // parallel runs; each run is internally deterministic
    std::function<void(const AblationRow&, const SeedRun&)> on_run;
};

/// Runs every point for every seed (seed s sets gen.seed and train.seed). A
/// failing run is recorded and the rest continue.
AblationTable run_ablation(const RunConfig& base, std::span<const SweepAxis> axes, const AblationOptions& options);

/// Median of a non-empty sample (mean of the middle two for even sizes).
double median(std::vector<double> values);

/// Value of `metric` in a flat report; DataError if absent.
double metric(const FlatReport& report, std::string_view name);

/// `point,<swept keys>,seeds,failed,<metric medians>`.
std::string ablation_csv(const AblationTable& table);
/// `point,seed,<metrics>` for every successful run.
std::string ablation_runs_csv(const AblationTable& table);

/// Angle to the own-class center, true-class probability and boosting weight
/// for every training sample.
std::vector<HardnessRecord> hardness_records(const EmbeddingModel& model, const TrainingSet& data,
                                             const MarginParams& margin, const WeightTable& table);

struct ScalePoint {
    double scale;
    double theta_deg;
    double prob;
};

/// True-class probability against num_classes - 1 orthogonal negatives, summed
/// exactly, for each scale over theta = 0..180 degrees in `step_deg` steps.
std::vector<ScalePoint> scale_curve(std::span<const double> scales, std::size_t num_classes,
                                    const MarginParams& margin, double step_deg = 5.0);

double orthogonal_negative_prob(double theta, double scale, std::size_t num_classes, const MarginParams& margin);

/// CSV `scale,theta_deg,prob`.
std::string scale_curve_csv(std::span<const ScalePoint> points);

}  // namespace hardboost
