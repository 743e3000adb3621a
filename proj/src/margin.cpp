#include "hardboost/margin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hardboost/errors.hpp"
#include "hardboost/io.hpp"

namespace hardboost {

void MarginParams::validate() const {
    if (!(m_s >= 0.0)) throw ConfigError("margin.m_s: must be non-negative");
    if (!(m_a >= 0.0)) throw ConfigError("margin.m_a: must be non-negative");
    if (!(m_c >= 0.0)) throw ConfigError("margin.m_c: must be non-negative");
    if (!(base_scale > 0.0) || !std::isfinite(base_scale)) throw ConfigError("margin.scale: must be positive");
    if (m_s > 1.0 && m_s * std::numbers::pi + m_a > std::numbers::pi)
        throw ConfigError("margin.m_s: m_s * pi + m_a exceeds pi");
}

MarginParams MarginParams::preset(std::string_view name, double scale) {
    if (name == "cosface") return cosface(scale);
    if (name == "arcface") return arcface(scale);
    if (name == "adaface" || name == "adaface-like") return adaface_like(scale);
    if (name == "softmax") return {1.0, 0.0, 0.0, scale};
    throw ConfigError("margin.preset: unknown preset '" + std::string(name) +
                      "' (expected cosface, arcface, adaface or softmax)");
}

double margin_logit(double theta, const MarginParams& params, double scale, bool is_positive) {
    constexpr double slack = 1e-9;
    if (!(theta >= -slack && theta <= std::numbers::pi + slack))
        throw ContractError("margin_logit: theta " + format_double(theta) + " outside [0, pi]");
    if (!is_positive) return scale * std::cos(theta);
    return scale * std::cos(params.m_s * theta + params.m_a) - params.m_c;
}

double margin_logit_dcos(double cos_theta, const MarginParams& params, double scale, bool is_positive) {
    if (!is_positive) return scale;
    const double c = std::clamp(cos_theta, -1.0, 1.0);
    const double theta = std::acos(c);
    double sin_theta = std::sqrt(std::max(0.0, 1.0 - c * c));
    if (std::abs(c) > 1.0 - 1e-6) sin_theta = std::max(sin_theta, 1e-6);
    // d/dc [s cos(m_s acos(c) + m_a)] = s m_s sin(m_s theta + m_a) / sin(theta)
    return scale * params.m_s * std::sin(params.m_s * theta + params.m_a) / sin_theta;
}

std::vector<LogitRow> forward_logits(const Matrix& features, const Matrix& centers,
                                     std::span<const std::size_t> labels, const MarginParams& params,
                                     std::span<const double> per_sample_scale) {
    const std::size_t n = features.rows();
    if (labels.size() != n || per_sample_scale.size() != n)
        throw DimensionError("forward_logits: labels/scales do not match batch size");
    if (features.cols() != centers.cols()) throw DimensionError("forward_logits: feature and center widths differ");

    for (std::size_t c = 0; c < centers.rows(); ++c)
        if (std::abs(l2_norm(centers.row(c)) - 1.0) > 1e-6)
            throw ContractError("forward_logits: center " + std::to_string(c) + " is not unit norm");

    std::vector<LogitRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = features.row(i);
        if (std::abs(l2_norm(x) - 1.0) > 1e-6)
            throw ContractError("forward_logits: feature " + std::to_string(i) + " is not unit norm");
        if (labels[i] >= centers.rows()) throw ContractError("forward_logits: label out of range");
        if (!(per_sample_scale[i] > 0.0)) throw ContractError("forward_logits: scale must be positive");

        auto& row = rows[i];
        row.label = labels[i];
        row.applied_scale = per_sample_scale[i];
        row.logits.resize(centers.rows());
        row.cosines.resize(centers.rows());
        for (std::size_t j = 0; j < centers.rows(); ++j) {
            const double c = std::clamp(dot(x, centers.row(j)), -1.0, 1.0);
            row.cosines[j] = c;
            // Negatives use the cosine directly; cos(acos(c)) != c in floating point.
            row.logits[j] = j == row.label ? margin_logit(std::acos(c), params, row.applied_scale, true)
                                           : row.applied_scale * c;
        }
    }
    return rows;
}

namespace {

double log_sum_exp(std::span<const double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

double log_prob(const LogitRow& row) {
    return std::max(row.logits[row.label] - log_sum_exp(row.logits), std::log(kProbFloor));
}

}  // namespace

Vector softmax(const LogitRow& row) {
    const double mx = *std::max_element(row.logits.begin(), row.logits.end());
    Vector p(row.logits.size());
    double total = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) total += (p[j] = std::exp(row.logits[j] - mx));
    for (auto& v : p) v /= total;
    return p;
}

double softmax_prob(const LogitRow& row) {
    const double mx = *std::max_element(row.logits.begin(), row.logits.end());
    double total = 0.0;
    for (double f : row.logits) total += std::exp(f - mx);
    return std::clamp(std::exp(row.logits[row.label] - mx) / total, kProbFloor, 1.0);
}

double weighted_loss(std::span<const LogitRow> rows, std::span<const double> weights) {
    if (rows.size() != weights.size()) throw DimensionError("weighted_loss: weights do not match batch");
    if (rows.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) acc += weights[i] * log_prob(rows[i]);
    return -acc / static_cast<double>(rows.size());
}

HeadGradient loss_backward(std::span<const LogitRow> rows, std::span<const double> weights, const Matrix& features,
                           const Matrix& centers, const MarginParams& params) {
    if (rows.size() != weights.size() || rows.size() != features.rows())
        throw DimensionError("loss_backward: batch sizes differ");
    HeadGradient grad{Matrix(features.rows(), features.cols()), Matrix(centers.rows(), centers.cols())};
    const double inv_n = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        // Below the probability floor the loss is constant.
        if (row.logits[row.label] - log_sum_exp(row.logits) < std::log(kProbFloor)) continue;
        const Vector p = softmax(row);
        const double coeff = weights[i] * inv_n;
        const auto x = features.row(i);
        auto gx = grad.features.row(i);
        for (std::size_t j = 0; j < p.size(); ++j) {
            const bool positive = j == row.label;
            const double dl_df = coeff * (p[j] - (positive ? 1.0 : 0.0));
            const double dl_dcos = dl_df * margin_logit_dcos(row.cosines[j], params, row.applied_scale, positive);
            const auto w = centers.row(j);
            auto gw = grad.centers.row(j);
            for (std::size_t k = 0; k < x.size(); ++k) {
                gx[k] += dl_dcos * w[k];
                gw[k] += dl_dcos * x[k];
            }
        }
    }
    return grad;
}

double approx_denominator(double pos_logit, std::size_t num_classes) {
    return std::exp(pos_logit) + static_cast<double>(num_classes - 1);
}

double true_denominator(const LogitRow& row) {
    // Negatives first, then the positive term.
    double negatives = 0.0;
    for (std::size_t j = 0; j < row.logits.size(); ++j)
        if (j != row.label) negatives += std::exp(row.logits[j]);
    return std::exp(row.logits[row.label]) + negatives;
}

double mean_denominator_gap(std::span<const LogitRow> rows) {
    if (rows.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& row : rows) {
        const double exact = true_denominator(row);
        acc += std::abs(exact - approx_denominator(row.logits[row.label], row.logits.size())) / exact;
    }
    return acc / static_cast<double>(rows.size());
}

EffectiveMargin effective_margin_decomposition(double weight, const MarginParams& params) {
    if (!(weight > 0.0)) throw ContractError("effective_margin_decomposition: weight must be positive");
    return {weight * params.base_scale, weight * params.m_c};
}

void write_hardness_csv(const std::filesystem::path& path, std::span<const HardnessRecord> records) {
    std::ostringstream out;
    out << "sample_id,theta,prob,weight\n";
    for (const auto& r : records)
        out << r.sample_id << ',' << format_double(r.theta) << ',' << format_double(r.prob) << ','
            << format_double(r.weight) << '\n';
    write_text(path, out.str());
}

}  // namespace hardboost
