#include "hardboost/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>

#include "hardboost/errors.hpp"
#include "hardboost/io.hpp"

namespace hardboost {

SweepAxis parse_sweep(std::string_view spec) {
    const auto eq = spec.find('=');
    if (eq == std::string_view::npos) throw ConfigError("--sweep: expected key=v1,v2,... got '" + std::string(spec) + "'");
    SweepAxis axis;
    axis.key = std::string(trim(spec.substr(0, eq)));
    for (auto v : split(spec.substr(eq + 1), ',')) {
        const auto t = trim(v);
        if (t.empty()) throw ConfigError("--sweep " + axis.key + ": empty value");
        axis.values.emplace_back(t);
    }
    RunConfig probe;
    for (const auto& v : axis.values) apply_setting(probe, axis.key, v);  // reject typos before any run starts
    return axis;
}

std::vector<std::vector<Setting>> expand_sweep(std::span<const SweepAxis> axes) {
    std::vector<std::vector<Setting>> points(1);
    for (const auto& axis : axes) {
        std::vector<std::vector<Setting>> next;
        for (const auto& p : points)
            for (const auto& v : axis.values) {
                auto q = p;
                q.emplace_back(axis.key, v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }
    return points;
}

std::string point_label(std::span<const Setting> settings) {
    if (settings.empty()) return "base";
    std::string out;
    for (const auto& [k, v] : settings) {
        if (!out.empty()) out += ' ';
        out += k + "=" + v;
    }
    return out;
}

EvalReport run_experiment(const RunConfig& config, const Dataset* dataset) {
    validate(config);
    std::optional<Dataset> generated;
    if (!dataset) {
        generated = generate(config.gen);
        dataset = &*generated;
    }
    const BoostResult result = boost_train(training_view(*dataset), config.train);
    return evaluate(result.ensemble, dataset->eval);
}

std::size_t AblationRow::failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const SeedRun& r) { return !r.metrics; }));
}

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double metric(const FlatReport& report, std::string_view name) {
    for (const auto& [k, v] : report)
        if (k == name) return v;
    throw DataError("metric '" + std::string(name) + "' not in report");
}

namespace {

int exit_code_for(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return 2;
    } catch (const NumericError&) {
        return 4;
    } catch (const DataError&) {
        return 3;
    } catch (...) {
        return 1;
    }
}

std::string message_of(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

}  // namespace

AblationTable run_ablation(const RunConfig& base, std::span<const SweepAxis> axes, const AblationOptions& options) {
    if (options.seeds.empty()) throw ConfigError("--seeds: need at least one seed");
    AblationTable table;
    for (const auto& a : axes) table.keys.push_back(a.key);
    for (auto& settings : expand_sweep(axes)) {
        AblationRow row;
        row.settings = std::move(settings);
        for (auto s : options.seeds) row.runs.push_back(SeedRun{s, std::nullopt, {}, 0});
        table.rows.push_back(std::move(row));
    }

    const std::size_t per_row = options.seeds.size();
    const std::size_t total = table.rows.size() * per_row;
    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    auto worker = [&] {
        for (std::size_t job = next++; job < total; job = next++) {
            AblationRow& row = table.rows[job / per_row];
            SeedRun& run = row.runs[job % per_row];
            try {
                RunConfig cfg = base;
                for (const auto& [k, v] : row.settings) apply_setting(cfg, k, v);
                cfg.set_seed(run.seed);
                run.metrics = flatten(run_experiment(cfg, options.dataset));
            } catch (...) {
                const auto e = std::current_exception();
                run.error = message_of(e);
                run.exit_code = exit_code_for(e);
            }
            if (options.on_run) {
                std::lock_guard lock(report_mutex);
                options.on_run(row, run);
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(total)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    for (auto& row : table.rows) {
        std::vector<const FlatReport*> ok;
        for (const auto& r : row.runs)
            if (r.metrics) ok.push_back(&*r.metrics);
        if (ok.empty()) continue;
        for (std::size_t m = 0; m < ok.front()->size(); ++m) {
            std::vector<double> vals;
            for (const auto* rep : ok) vals.push_back((*rep)[m].second);
            row.median.emplace_back((*ok.front())[m].first, median(std::move(vals)));
        }
    }
    return table;
}

namespace {

const FlatReport* metric_header(const AblationTable& table) {
    for (const auto& row : table.rows)
        for (const auto& r : row.runs)
            if (r.metrics) return &*r.metrics;
    return nullptr;
}

}  // namespace

std::string ablation_csv(const AblationTable& table) {
    const FlatReport* header = metric_header(table);
    std::string out = "point";
    for (const auto& k : table.keys) out += "," + k;
    out += ",seeds,failed";
    if (header)
        for (const auto& [name, v] : *header) out += "," + name;
    out += "\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        out += std::to_string(i);
        for (const auto& [k, v] : row.settings) out += "," + v;
        out += "," + std::to_string(row.runs.size()) + "," + std::to_string(row.failures());
        if (header)
            for (std::size_t m = 0; m < header->size(); ++m)
                out += "," + (row.median.empty() ? std::string("nan") : format_double(row.median[m].second));
        out += "\n";
    }
    return out;
}

std::string ablation_runs_csv(const AblationTable& table) {
    const FlatReport* header = metric_header(table);
    std::string out = "point,seed";
    if (header)
        for (const auto& [name, v] : *header) out += "," + name;
    out += "\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        for (const auto& r : table.rows[i].runs) {
            if (!r.metrics) continue;
            out += std::to_string(i) + "," + std::to_string(r.seed);
            for (const auto& [name, v] : *r.metrics) out += "," + format_double(v);
            out += "\n";
        }
    return out;
}

std::vector<HardnessRecord> hardness_records(const EmbeddingModel& model, const TrainingSet& data,
                                             const MarginParams& margin, const WeightTable& table) {
    if (table.size() != data.size()) throw DimensionError("hardness_records: weight table does not cover the data");
    const std::vector<double> probs = compute_dataset_probs(model, data, margin);
    const Matrix centers = unit_centers(model);
    std::vector<HardnessRecord> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector e = embed(model, data.inputs.row(i));
        const double c = std::clamp(dot(e, centers.row(data.labels[i])), -1.0, 1.0);
        out.push_back({i, std::acos(c), probs[i], table.weights[i]});
    }
    return out;
}

double orthogonal_negative_prob(double theta, double scale, std::size_t num_classes, const MarginParams& margin) {
    if (num_classes < 2) throw ContractError("scale curve: need at least two classes");
    LogitRow row;
    row.label = 0;
    row.applied_scale = scale;
    row.cosines.assign(num_classes, 0.0);
    row.cosines[0] = std::cos(theta);
    row.logits.assign(num_classes, 0.0);  // s * cos(theta_j) with every negative cosine exactly 0
    row.logits[0] = margin_logit(theta, margin, scale, true);
    return softmax_prob(row);
}

std::vector<ScalePoint> scale_curve(std::span<const double> scales, std::size_t num_classes,
                                    const MarginParams& margin, double step_deg) {
    if (!(step_deg > 0.0)) throw ConfigError("--step: must be positive");
    std::vector<ScalePoint> out;
    const auto steps = static_cast<int>(std::floor(180.0 / step_deg + 1e-9));
    for (double s : scales)
        for (int i = 0; i <= steps; ++i) {
            const double deg = i * step_deg;
            out.push_back({s, deg, orthogonal_negative_prob(deg * std::numbers::pi / 180.0, s, num_classes, margin)});
        }
    return out;
}

std::string scale_curve_csv(std::span<const ScalePoint> points) {
    std::string out = "scale,theta_deg,prob\n";
    for (const auto& p : points)
        out += format_double(p.scale) + "," + format_double(p.theta_deg) + "," + format_double(p.prob) + "\n";
    return out;
}

}  // namespace hardboost
