#include "hardboost/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hardboost/errors.hpp"
#include "hardboost/io.hpp"
#include "hardboost/margin.hpp"

namespace hardboost {

WeightTable init_table(std::size_t num_samples, double alpha) {
    if (num_samples == 0) throw ContractError("init_table: need at least one sample");
    if (!(alpha >= 0.0)) throw ConfigError("train.alpha: must be non-negative");
    return WeightTable{1, std::vector<double>(num_samples, 1.0), alpha};
}

WeightTable update_weights(const WeightTable& table, std::span<const double> probs) {
    if (probs.size() != table.size())
        throw ContractError("update_weights: " + std::to_string(probs.size()) + " probabilities for " +
                            std::to_string(table.size()) + " samples");
    WeightTable next{table.round + 1, table.weights, table.alpha};
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (!(p >= kProbFloor && p <= 1.0))
            throw ContractError("update_weights: probability " + format_double(p) + " of sample " +
                                std::to_string(i) + " outside [1e-12, 1]");
        next.weights[i] = table.weights[i] * std::pow(p, -table.alpha);
    }
    return next;
}

void renormalize(WeightTable& table) {
    double total = 0.0;
    for (double w : table.weights) total += w;
    const double factor = static_cast<double>(table.size()) / total;
    for (auto& w : table.weights) w *= factor;
}

HardnessStats update_running_stats(const HardnessStats& stats, std::span<const double> batch_weights) {
    if (batch_weights.empty()) throw ContractError("update_running_stats: empty batch");
    const double n = static_cast<double>(batch_weights.size());
    double mean = 0.0;
    for (double w : batch_weights) mean += w;
    mean /= n;
    double var = 0.0;
    for (double w : batch_weights) var += (w - mean) * (w - mean);
    const double sd = std::sqrt(var / n);

    HardnessStats next = stats;
    if (!stats.initialized) {
        next.running_mean = mean;
        next.running_std = sd;
        next.initialized = true;
    } else {
        const double m = stats.ema_momentum;
        next.running_mean = m * stats.running_mean + (1.0 - m) * mean;
        next.running_std = m * stats.running_std + (1.0 - m) * sd;
    }
    if (!std::isfinite(next.running_mean) || !std::isfinite(next.running_std))
        throw NumericError("hardness statistics became non-finite");
    return next;
}

double normalize_hardness(double weight, const HardnessStats& stats) {
    return (weight - stats.running_mean) / std::max(stats.running_std, stats.epsilon) * stats.lambda;
}

double adapt_scale(double base_scale, double d_hat) {
    return base_scale - std::clamp(d_hat, -kScaleClip, kScaleClip) * base_scale;
}

void save_weight_table(const std::filesystem::path& path, const WeightTable& table, const WeightTableMeta& meta) {
    std::ostringstream csv;
    csv << "sample_id,weight\n";
    for (std::size_t i = 0; i < table.size(); ++i) csv << i << ',' << format_double(table.weights[i]) << '\n';
    write_text(path, csv.str());

    std::ostringstream side;
    side << "round = " << meta.round << '\n'
         << "alpha = " << format_double(meta.alpha) << '\n'
         << "lambda = " << format_double(meta.lambda) << '\n'
         << "ema_momentum = " << format_double(meta.ema_momentum) << '\n';
    write_text(path.string() + ".meta", side.str());
}

WeightTable load_weight_table(const std::filesystem::path& path, WeightTableMeta* meta) {
    const std::string csv = read_text(path);
    const auto lines = split(csv, '\n');
    if (lines.empty() || trim(lines[0]) != "sample_id,weight")
        throw DataError(path.string() + ": expected header 'sample_id,weight'");

    WeightTable table;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto line = trim(lines[l]);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2) throw DataError(path.string() + ":" + std::to_string(l + 1) + ": expected 2 fields");
        const auto id = parse_int(fields[0]);
        if (id != static_cast<std::int64_t>(table.weights.size()))
            throw DataError(path.string() + ":" + std::to_string(l + 1) + ": sample ids must be dense and ordered");
        const double w = parse_double(fields[1]);
        if (!(w > 0.0) || !std::isfinite(w))
            throw DataError(path.string() + ":" + std::to_string(l + 1) + ": weight must be positive");
        table.weights.push_back(w);
    }

    WeightTableMeta m;
    const std::string side = read_text(path.string() + ".meta");
    for (auto line : split(side, '\n')) {
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw DataError(path.string() + ".meta: malformed line");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "round") m.round = static_cast<int>(parse_int(value));
        else if (key == "alpha") m.alpha = parse_double(value);
        else if (key == "lambda") m.lambda = parse_double(value);
        else if (key == "ema_momentum") m.ema_momentum = parse_double(value);
        else throw DataError(path.string() + ".meta: unknown key '" + std::string(key) + "'");
    }
    table.round = m.round;
    table.alpha = m.alpha;
    if (meta) *meta = m;
    return table;
}

}  // namespace hardboost
