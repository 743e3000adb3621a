#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hardboost/errors.hpp"
#include "hardboost/model.hpp"
#include "hardboost/synth.hpp"

namespace hardboost {

/// H_final(a, b) = sum_k beta_k * cos(embed_k(a), embed_k(b)).
struct Ensemble {
    std::vector<EmbeddingModel> models;
    std::vector<double> betas;

    /// len(models) == len(betas) >= 1, betas finite; ContractError otherwise.
    void validate() const;
};

double ensemble_score(std::span<const double> a, std::span<const double> b, const Ensemble& ensemble);

/// Unit embeddings of every input under every model: one N x dim matrix per model.
struct EmbeddingTable {
    std::vector<Matrix> per_model;
    std::vector<double> betas;

    /// Same accumulation order as ensemble_score.
    double score(std::size_t i, std::size_t j) const;
};

EmbeddingTable embed_all(const Ensemble& ensemble, std::span<const LabeledSample> samples);

inline constexpr std::array<double, 3> kFarTargets = {1e-3, 1e-2, 1e-1};
inline constexpr std::array<std::size_t, 3> kRanks = {1, 5, 20};
inline constexpr std::array<std::string_view, 3> kStrata = {"overall", "easy", "hard"};

struct RocPoint {
    double threshold;
    double far;
    double tar;
};

/// Operating points for every distinct score plus +/-inf, thresholds descending.
/// A pair is accepted when score >= threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const char> genuine);

/// Highest TAR among thresholds whose empirical FAR <= target.
double tar_at_far(std::span<const RocPoint> roc, double target);

struct VerificationStats {
    std::size_t genuine = 0;
    std::size_t impostor = 0;
    double accuracy = 0.0;   // at the threshold maximizing (TPR + TNR) / 2
    double threshold = 0.0;
    std::array<double, 3> tar{};  // at kFarTargets

    friend bool operator==(const VerificationStats&, const VerificationStats&) = default;
};

/// ContractError when there are no impostor or no genuine pairs.
VerificationStats verification_stats(std::span<const double> scores, std::span<const char> genuine);

struct IdentificationStats {
    std::size_t probes = 0;
    std::array<double, 3> rank{};  // at kRanks

    friend bool operator==(const IdentificationStats&, const IdentificationStats&) = default;
};

/// 1-based rank of `true_index` in descending score order; ties go to the lower index.
std::size_t rank_of(std::span<const double> scores, std::size_t true_index);

/// Rows are probes, columns gallery entries.
IdentificationStats identification_stats(const Matrix& scores, std::span<const std::size_t> true_columns);

struct EvalReport {
    std::array<VerificationStats, 3> verification;      // by kStrata; genuine == 0 marks an empty stratum
    std::array<IdentificationStats, 3> identification;  // by kStrata

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Fills the verification half of the report. Pairs tagged easy-easy form the
/// easy stratum; a pair with any hard member is hard.
void verification_eval(const EvalSplit& split, const EmbeddingTable& table, EvalReport& report,
                       std::vector<RocPoint>* overall_roc = nullptr);

/// Fills the identification half. ContractError if a probe's class has no gallery entry
/// or the gallery repeats a class.
void identification_eval(const EvalSplit& split, const EmbeddingTable& table, EvalReport& report);

EvalReport evaluate(const Ensemble& ensemble, const EvalSplit& split, std::vector<RocPoint>* overall_roc = nullptr);

/// Metric name/value pairs in a fixed order, e.g. `identification.hard.rank1`.
std::vector<std::pair<std::string, double>> flatten(const EvalReport& report);

std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc);

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

struct MetricDelta {
    std::string metric;
    double a;
    double b;
    double delta;  // b - a
};

/// Metric-by-metric difference; SchemaError if the metric sets differ.
std::vector<MetricDelta> compare_runs(std::span<const std::pair<std::string, double>> a,
                                      std::span<const std::pair<std::string, double>> b);
std::vector<MetricDelta> compare_runs(const EvalReport& a, const EvalReport& b);

/// CSV `metric,a,b,delta`.
std::string deltas_csv(std::span<const MetricDelta> deltas);
/// Same content, column-aligned for terminals.
std::string deltas_text(std::span<const MetricDelta> deltas);

/// Reads the flat CSV written by report_csv.
std::vector<std::pair<std::string, double>> load_flat_report(const std::filesystem::path& path);

}  // namespace hardboost
