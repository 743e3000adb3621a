#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hardboost/matrix.hpp"

namespace hardboost {

/// Combined angular margin: the positive class logit is
///   s * cos(m_s * theta + m_a) - m_c
/// and every negative logit is s * cos(theta).
struct MarginParams {
    double m_s = 1.0;  // multiplicative angular margin
    double m_a = 0.0;  // additive angular margin, radians
    double m_c = 0.0;  // additive cosine margin
    double base_scale = 30.0;

    void validate() const;

    static MarginParams cosface(double scale = 30.0) { return {1.0, 0.0, 0.35, scale}; }
    static MarginParams arcface(double scale = 30.0) { return {1.0, 0.5, 0.0, scale}; }
    /// Fixed-margin stand-in for a norm-adaptive head: the midpoint between
    /// its pure-angular and pure-cosine extremes (m = 0.4).
    static MarginParams adaface_like(double scale = 30.0) { return {1.0, 0.2, 0.2, scale}; }
    /// "cosface", "arcface", "adaface" (alias "adaface-like"), "softmax"; ConfigError otherwise.
    static MarginParams preset(std::string_view name, double scale = 30.0);

    friend bool operator==(const MarginParams&, const MarginParams&) = default;
};

inline constexpr double kProbFloor = 1e-12;

/// Throws ContractError when theta is outside [0, pi] by more than 1e-9.
double margin_logit(double theta, const MarginParams& params, double scale, bool is_positive);

/// d(logit)/d(cos theta) with sin(theta) clamped below at 1e-6 near the poles.
double margin_logit_dcos(double cos_theta, const MarginParams& params, double scale, bool is_positive);

struct LogitRow {
    Vector logits;         // one per class
    Vector cosines;        // <x_i, W_j> clamped to [-1, 1]
    std::size_t label = 0;
    double applied_scale = 0.0;
};

/// features: N x dim unit rows; centers: C x dim unit rows.
std::vector<LogitRow> forward_logits(const Matrix& features, const Matrix& centers,
                                     std::span<const std::size_t> labels, const MarginParams& params,
                                     std::span<const double> per_sample_scale);

/// Softmax probability of the labelled class, clamped to [1e-12, 1].
double softmax_prob(const LogitRow& row);

/// Full softmax distribution of the row (max-subtracted).
Vector softmax(const LogitRow& row);

/// L = -(1/N) sum_i d_i log p_i.
double weighted_loss(std::span<const LogitRow> rows, std::span<const double> weights);

struct HeadGradient {
    Matrix features;  // N x dim, w.r.t. the unit features
    Matrix centers;   // C x dim, w.r.t. the unit centers
};

HeadGradient loss_backward(std::span<const LogitRow> rows, std::span<const double> weights, const Matrix& features,
                           const Matrix& centers, const MarginParams& params);

/// exp(pos_logit) + C - 1: the denominator once every negative cosine is zero.
double approx_denominator(double pos_logit, std::size_t num_classes);

/// sum_j exp(f_j) for the row, the labelled term added last.
double true_denominator(const LogitRow& row);

/// Mean over rows of |true - approx| / true.
double mean_denominator_gap(std::span<const LogitRow> rows);

struct EffectiveMargin {
    double scale;
    double cosine_margin;
};

/// Raising exp(f) to the power d is the same as using scale d*s and cosine margin d*m_c.
EffectiveMargin effective_margin_decomposition(double weight, const MarginParams& params);

struct HardnessRecord {
    std::size_t sample_id;
    double theta;
    double prob;
    double weight;
};

/// CSV with header `sample_id,theta,prob,weight`.
void write_hardness_csv(const std::filesystem::path& path, std::span<const HardnessRecord> records);

}  // namespace hardboost
