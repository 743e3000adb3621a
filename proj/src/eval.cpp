#include "hardboost/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hardboost/io.hpp"

namespace hardboost {

void Ensemble::validate() const {
    if (models.empty()) throw ContractError("ensemble has no models");
    if (models.size() != betas.size())
        throw ContractError("ensemble has " + std::to_string(models.size()) + " models but " +
                            std::to_string(betas.size()) + " betas");
    for (double b : betas)
        if (!std::isfinite(b)) throw ContractError("ensemble beta is not finite");
}

double ensemble_score(std::span<const double> a, std::span<const double> b, const Ensemble& ensemble) {
    ensemble.validate();
    double score = 0.0;
    for (std::size_t k = 0; k < ensemble.models.size(); ++k)
        score += ensemble.betas[k] * dot(embed(ensemble.models[k], a), embed(ensemble.models[k], b));
    return score;
}

double EmbeddingTable::score(std::size_t i, std::size_t j) const {
    double score = 0.0;
    for (std::size_t k = 0; k < per_model.size(); ++k) score += betas[k] * dot(per_model[k].row(i), per_model[k].row(j));
    return score;
}

EmbeddingTable embed_all(const Ensemble& ensemble, std::span<const LabeledSample> samples) {
    ensemble.validate();
    EmbeddingTable table;
    table.betas = ensemble.betas;
    for (const auto& model : ensemble.models) {
        Matrix m(samples.size(), model.embed_dim());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const Vector e = embed(model, samples[i].input);
            std::copy(e.begin(), e.end(), m.row(i).begin());
        }
        table.per_model.push_back(std::move(m));
    }
    return table;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const char> genuine) {
    if (scores.size() != genuine.size()) throw DimensionError("roc_curve: scores and labels differ in length");
    const auto num_genuine = static_cast<std::size_t>(std::count_if(genuine.begin(), genuine.end(), [](char g) { return g != 0; }));
    const std::size_t num_impostor = scores.size() - num_genuine;
    if (num_impostor == 0) throw ContractError("verification needs impostor pairs to measure FAR");
    if (num_genuine == 0) throw ContractError("verification needs genuine pairs to measure TAR");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return scores[x] != scores[y] ? scores[x] > scores[y] : x < y;
    });

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<RocPoint> roc{{inf, 0.0, 0.0}};
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t pos = 0; pos < order.size();) {
        const double t = scores[order[pos]];
        while (pos < order.size() && scores[order[pos]] == t) {
            (genuine[order[pos]] ? tp : fp)++;
            ++pos;
        }
        roc.push_back({t, static_cast<double>(fp) / static_cast<double>(num_impostor),
                       static_cast<double>(tp) / static_cast<double>(num_genuine)});
    }
    roc.push_back({-inf, 1.0, 1.0});
    return roc;
}

double tar_at_far(std::span<const RocPoint> roc, double target) {
    double best = 0.0;
    for (const auto& p : roc)
        if (p.far <= target) best = std::max(best, p.tar);
    return best;
}

VerificationStats verification_stats(std::span<const double> scores, std::span<const char> genuine) {
    const auto roc = roc_curve(scores, genuine);
    VerificationStats stats;
    stats.genuine = static_cast<std::size_t>(std::count_if(genuine.begin(), genuine.end(), [](char g) { return g != 0; }));
    stats.impostor = scores.size() - stats.genuine;
    double best_balanced = -1.0;
    for (const auto& p : roc) {
        const double balanced = 0.5 * (p.tar + 1.0 - p.far);
        if (balanced > best_balanced) {
            best_balanced = balanced;
            stats.threshold = p.threshold;
            stats.accuracy = (p.tar * static_cast<double>(stats.genuine) +
                              (1.0 - p.far) * static_cast<double>(stats.impostor)) /
                             static_cast<double>(scores.size());
        }
    }
    for (std::size_t f = 0; f < kFarTargets.size(); ++f) stats.tar[f] = tar_at_far(roc, kFarTargets[f]);
    return stats;
}

std::size_t rank_of(std::span<const double> scores, std::size_t true_index) {
    if (true_index >= scores.size()) throw ContractError("rank_of: true index out of range");
    const double mine = scores[true_index];
    std::size_t rank = 1;
    for (std::size_t j = 0; j < scores.size(); ++j)
        if (j != true_index && (scores[j] > mine || (scores[j] == mine && j < true_index))) ++rank;
    return rank;
}

IdentificationStats identification_stats(const Matrix& scores, std::span<const std::size_t> true_columns) {
    if (scores.rows() != true_columns.size()) throw DimensionError("identification: one true column per probe");
    IdentificationStats stats;
    stats.probes = scores.rows();
    if (stats.probes == 0) return stats;
    std::array<std::size_t, 3> hits{};
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const std::size_t r = rank_of(scores.row(i), true_columns[i]);
        for (std::size_t k = 0; k < kRanks.size(); ++k)
            if (r <= kRanks[k]) ++hits[k];
    }
    for (std::size_t k = 0; k < kRanks.size(); ++k)
        stats.rank[k] = static_cast<double>(hits[k]) / static_cast<double>(stats.probes);
    return stats;
}

void verification_eval(const EvalSplit& split, const EmbeddingTable& table, EvalReport& report,
                       std::vector<RocPoint>* overall_roc) {
    if (split.pairs.empty()) throw ContractError("verification needs at least one pair");
    std::array<std::vector<double>, 3> scores;
    std::array<std::vector<char>, 3> genuine;
    for (const auto& p : split.pairs) {
        const double s = table.score(p.a, p.b);
        const std::size_t stratum = p.tag == TierPair::EasyEasy ? 1 : 2;
        for (std::size_t st : {std::size_t{0}, stratum}) {
            scores[st].push_back(s);
            genuine[st].push_back(p.same_class ? 1 : 0);
        }
    }
    for (std::size_t st = 0; st < 3; ++st) {
        const auto g = static_cast<std::size_t>(std::count(genuine[st].begin(), genuine[st].end(), 1));
        const std::size_t imp = genuine[st].size() - g;
        if (st > 0 && (g == 0 || imp == 0)) {
            report.verification[st] = VerificationStats{g, imp, 0.0, 0.0, {}};
            continue;
        }
        report.verification[st] = verification_stats(scores[st], genuine[st]);
    }
    if (overall_roc) *overall_roc = roc_curve(scores[0], genuine[0]);
}

void identification_eval(const EvalSplit& split, const EmbeddingTable& table, EvalReport& report) {
    std::map<std::size_t, std::size_t> column_of_class;
    for (std::size_t g = 0; g < split.gallery.size(); ++g) {
        const auto cls = split.samples.at(split.gallery[g]).class_id;
        if (!column_of_class.emplace(cls, g).second)
            throw ContractError("gallery repeats class " + std::to_string(cls));
    }

    std::array<std::vector<std::size_t>, 3> probe_rows;
    for (std::size_t p : split.probes) {
        const auto& s = split.samples.at(p);
        if (!column_of_class.contains(s.class_id))
            throw ContractError("probe class " + std::to_string(s.class_id) + " has no gallery entry");
        probe_rows[0].push_back(p);
        probe_rows[s.tier == Tier::Easy ? 1 : 2].push_back(p);
    }

    for (std::size_t st = 0; st < 3; ++st) {
        Matrix scores(probe_rows[st].size(), split.gallery.size());
        std::vector<std::size_t> truth;
        for (std::size_t r = 0; r < probe_rows[st].size(); ++r) {
            const std::size_t p = probe_rows[st][r];
            for (std::size_t g = 0; g < split.gallery.size(); ++g) scores(r, g) = table.score(p, split.gallery[g]);
            truth.push_back(column_of_class.at(split.samples[p].class_id));
        }
        report.identification[st] = identification_stats(scores, truth);
    }
}

EvalReport evaluate(const Ensemble& ensemble, const EvalSplit& split, std::vector<RocPoint>* overall_roc) {
    const EmbeddingTable table = embed_all(ensemble, split.samples);
    EvalReport report;
    verification_eval(split, table, report, overall_roc);
    identification_eval(split, table, report);
    return report;
}

namespace {

std::string far_label(double far) {
    std::ostringstream s;
    s << far;
    return s.str();
}

}  // namespace

std::vector<std::pair<std::string, double>> flatten(const EvalReport& report) {
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t st = 0; st < 3; ++st) {
        const std::string prefix = "verification." + std::string(kStrata[st]) + ".";
        const auto& v = report.verification[st];
        out.emplace_back(prefix + "genuine", static_cast<double>(v.genuine));
        out.emplace_back(prefix + "impostor", static_cast<double>(v.impostor));
        out.emplace_back(prefix + "accuracy", v.accuracy);
        for (std::size_t f = 0; f < kFarTargets.size(); ++f)
            out.emplace_back(prefix + "tar@far=" + far_label(kFarTargets[f]), v.tar[f]);
    }
    for (std::size_t st = 0; st < 3; ++st) {
        const std::string prefix = "identification." + std::string(kStrata[st]) + ".";
        const auto& id = report.identification[st];
        out.emplace_back(prefix + "probes", static_cast<double>(id.probes));
        for (std::size_t k = 0; k < kRanks.size(); ++k)
            out.emplace_back(prefix + "rank" + std::to_string(kRanks[k]), id.rank[k]);
    }
    return out;
}

std::string report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    for (std::size_t st = 0; st < 3; ++st) {
        const auto& v = report.verification[st];
        auto& node = j["verification"][std::string(kStrata[st])];
        node["genuine_pairs"] = v.genuine;
        node["impostor_pairs"] = v.impostor;
        node["accuracy"] = v.accuracy;
        node["threshold"] = std::isfinite(v.threshold) ? nlohmann::ordered_json(v.threshold)
                                                       : nlohmann::ordered_json(v.threshold > 0 ? "inf" : "-inf");
        for (std::size_t f = 0; f < kFarTargets.size(); ++f) node["tar_at_far"][far_label(kFarTargets[f])] = v.tar[f];
    }
    for (std::size_t st = 0; st < 3; ++st) {
        const auto& id = report.identification[st];
        auto& node = j["identification"][std::string(kStrata[st])];
        node["probes"] = id.probes;
        for (std::size_t k = 0; k < kRanks.size(); ++k) node["rank" + std::to_string(kRanks[k])] = id.rank[k];
    }
    return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "metric,value\n";
    for (const auto& [name, value] : flatten(report)) out << name << ',' << format_double(value) << '\n';
    return out.str();
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc) {
    std::ostringstream out;
    out << "far,tar\n";
    for (const auto& p : roc) out << format_double(p.far) << ',' << format_double(p.tar) << '\n';
    write_text(path, out.str());
}

std::vector<MetricDelta> compare_runs(std::span<const std::pair<std::string, double>> a,
                                      std::span<const std::pair<std::string, double>> b) {
    std::set<std::string> names_a;
    std::set<std::string> names_b;
    for (const auto& m : a) names_a.insert(m.first);
    for (const auto& m : b) names_b.insert(m.first);
    if (names_a != names_b || names_a.size() != a.size() || names_b.size() != b.size())
        throw SchemaError("compare_runs: reports carry different metric sets");

    std::map<std::string, double> lookup(b.begin(), b.end());
    std::vector<MetricDelta> out;
    for (const auto& [name, va] : a) {
        const double vb = lookup.at(name);
        out.push_back({name, va, vb, vb - va});
    }
    return out;
}

std::vector<MetricDelta> compare_runs(const EvalReport& a, const EvalReport& b) {
    const auto fa = flatten(a);
    const auto fb = flatten(b);
    return compare_runs(fa, fb);
}

std::string deltas_csv(std::span<const MetricDelta> deltas) {
    std::ostringstream out;
    out << "metric,a,b,delta\n";
    for (const auto& d : deltas)
        out << d.metric << ',' << format_double(d.a) << ',' << format_double(d.b) << ',' << format_double(d.delta)
            << '\n';
    return out.str();
}

std::string deltas_text(std::span<const MetricDelta> deltas) {
    std::size_t width = 6;
    for (const auto& d : deltas) width = std::max(width, d.metric.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "metric" << std::right << std::setw(12) << "a"
        << std::setw(12) << "b" << std::setw(12) << "delta" << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& d : deltas)
        out << std::left << std::setw(static_cast<int>(width)) << d.metric << std::right << std::setw(12) << d.a
            << std::setw(12) << d.b << std::setw(12) << std::showpos << d.delta << std::noshowpos << '\n';
    return out.str();
}

std::vector<std::pair<std::string, double>> load_flat_report(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    const auto lines = split(text, '\n');
    if (lines.empty() || trim(lines[0]) != "metric,value")
        throw SchemaError(path.string() + ": expected header 'metric,value'");
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        const auto line = trim(lines[l]);
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string_view::npos) throw SchemaError(path.string() + ": malformed line");
        out.emplace_back(std::string(line.substr(0, comma)), parse_double(line.substr(comma + 1)));
    }
    return out;
}

}  // namespace hardboost
