// hardboost: generate synthetic data, train boosted ensembles, evaluate, sweep.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hardboost/checkpoint.hpp"
#include "hardboost/config.hpp"
#include "hardboost/errors.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/experiment.hpp"
#include "hardboost/io.hpp"
#include "hardboost/synth.hpp"
#include "hardboost/trainer.hpp"

namespace fs = std::filesystem;
using namespace hardboost;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string command_line;
};

struct ConfigArgs {
    std::string file;
    std::vector<std::string> sets;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.file, "key = value config file; unset keys keep their defaults");
    cmd->add_option("--set", args.sets, "override one key, e.g. --set train.alpha=0.3 (repeatable, applied after --config)");
}

RunConfig resolve_config(const ConfigArgs& args, const Globals& g) {
    RunConfig config;
    if (!args.file.empty()) apply_config_text(config, read_text(args.file), args.file);
    for (const auto& s : args.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + s + "'");
        apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
    }
    if (g.seed) config.set_seed(*g.seed);
    validate(config);
    return config;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_checksum(const fs::path& p) { return hex64(fnv1a64(read_file(p))); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string config_key_listing() {
    const RunConfig defaults;
    std::ostringstream out;
    out << "Config keys (default value):\n";
    for (const auto& k : config_keys()) {
        std::string value = k.key == "margin.preset" ? "-" : setting_value(defaults, k.key);
        std::string left = "  " + std::string(k.key) + " = " + value;
        if (left.size() < 44) left.resize(44, ' ');
        out << left << "  " << k.help << "\n";
    }
    return out.str();
}

// generate ---------------------------------------------------------------

struct GenerateArgs {
    ConfigArgs config;
    std::string out;
    std::string csv;
};

int cmd_generate(const GenerateArgs& a, const Globals& g) {
    const RunConfig config = resolve_config(a.config, g);
    const Dataset data = generate(config.gen);
    save_dataset(a.out, data);
    if (!a.csv.empty()) export_dataset_csv(a.csv, data);

    std::string snapshot;
    const std::string full = config_snapshot(config);
    for (const auto& line : split(full, '\n'))
        if (line.starts_with("gen.")) snapshot += std::string(line) + "\n";
    std::string manifest = "format = hardboost-dataset-manifest\nversion = 1\n";
    manifest += "command = " + g.command_line + "\n";
    manifest += "seed = " + std::to_string(config.gen.seed) + "\n";
    manifest += "dataset = " + fs::path(a.out).filename().string() + "\n";
    manifest += "dataset.version = " + std::to_string(kDatasetVersion) + "\n";
    manifest += "dataset.checksum = " + file_checksum(a.out) + "\n";
    if (!a.csv.empty()) manifest += "csv = " + a.csv + "\n";
    manifest += snapshot;
    write_text(a.out + ".manifest", manifest);

    std::printf("wrote %s: %zu training samples (%zu classes), %zu held-out samples, %zu pairs, %zu probes\n",
                a.out.c_str(), data.train.size(), config.gen.num_train_classes(), data.eval.samples.size(),
                data.eval.pairs.size(), data.eval.probes.size());
    return 0;
}

// train ------------------------------------------------------------------

struct TrainArgs {
    ConfigArgs config;
    std::string data;
    std::string out;
    bool resume = false;
};

int cmd_train(const TrainArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig config = resolve_config(a.config, g);
    const Dataset data = load_dataset(a.data);
    const TrainingSet train = training_view(data);
    const fs::path run_dir = a.out;
    const std::string snapshot = config_snapshot(config);

    const fs::path snapshot_path = run_dir / "config.snapshot";
    if (a.resume && fs::exists(snapshot_path) && read_text(snapshot_path) != snapshot)
        throw ConfigError("--resume: configuration differs from " + snapshot_path.string());
    fs::create_directories(run_dir);
    write_text(snapshot_path, snapshot);

    RunOptions options;
    options.run_dir = run_dir;
    options.resume = a.resume;
    options.on_round = [](const RoundRecord& r) {
        std::printf("round %d: final loss %.6f over %zu epochs (%.1f s)\n", r.round, r.final_loss, r.metrics.size(),
                    r.wall_seconds);
        std::fflush(stdout);
    };
    BoostResult result;
    try {
        result = boost_train(train, config.train, options);
    } catch (const TrainingDivergedError& e) {
        throw TrainingDivergedError(std::string("training ") + run_dir.string() + ": " + e.what(), e.epoch, e.batch,
                                    e.sample_ids);
    }

    for (std::size_t k = 0; k < result.records.size(); ++k) {
        const auto recs =
            hardness_records(result.ensemble.models[k], train, config.train.margin, result.tables[k]);
        write_hardness_csv(run_dir / ("round_" + std::to_string(k + 1)) / "hardness.csv", recs);
    }

    std::string manifest = "format = hardboost-run\nversion = 1\n";
    manifest += "command = " + g.command_line + "\n";
    manifest += "seed = " + std::to_string(config.train.seed) + "\n";
    manifest += "dataset = " + a.data + "\n";
    manifest += "dataset.checksum = " + file_checksum(a.data) + "\n";
    manifest += "config = config.snapshot\n";
    manifest += "checkpoint.version = " + std::to_string(kCheckpointVersion) + "\n";
    manifest += "dataset.version = " + std::to_string(kDatasetVersion) + "\n";
    manifest += "ensemble.version = " + std::to_string(kManifestVersion) + "\n";
    manifest += "ensemble = ensemble.manifest\n";
    for (std::size_t k = 1; k <= result.records.size(); ++k) {
        const std::string dir = "round_" + std::to_string(k);
        manifest += "round." + std::to_string(k) + " = " + dir + "/checkpoint.bin " + dir + "/weights.csv " + dir +
                    "/metrics.csv " + dir + "/hardness.csv\n";
    }
    write_text(run_dir / "run.manifest", manifest);

    std::printf("wrote %s: %s, %zu model(s), %.1f s wall-clock\n", run_dir.c_str(),
                std::string(to_string(config.train.variant)).c_str(), result.ensemble.models.size(), seconds_since(t0));
    return 0;
}

// eval -------------------------------------------------------------------

struct EvalArgs {
    std::string run;
    std::string data;
    std::string out;
    std::string betas;
    std::string roc;
};

std::vector<double> parse_list(std::string_view what, std::string_view text) {
    std::vector<double> out;
    for (auto item : split(text, ',')) {
        try {
            out.push_back(parse_double(trim(item)));
        } catch (const DataError&) {
            throw ConfigError(std::string(what) + ": bad number '" + std::string(trim(item)) + "'");
        }
    }
    return out;
}

int cmd_eval(const EvalArgs& a, const Globals&) {
    std::optional<std::vector<double>> betas;
    if (!a.betas.empty()) betas = parse_list("--betas", a.betas);
    const Ensemble ensemble = load_ensemble(a.run, betas);
    const Dataset data = load_dataset(a.data);
    std::vector<RocPoint> roc;
    const EvalReport report = evaluate(ensemble, data.eval, a.roc.empty() ? nullptr : &roc);

    const fs::path out = a.out.empty() ? fs::path(a.run) / "eval" : fs::path(a.out);
    write_text(out / "report.json", report_json(report));
    write_text(out / "report.csv", report_csv(report));
    if (!a.roc.empty()) write_roc_csv(a.roc, roc);

    const auto& v = report.verification;
    const auto& id = report.identification;
    std::printf("%-8s %9s %9s %9s %9s %9s\n", "stratum", "acc", "tar@1e-3", "rank1", "rank5", "rank20");
    for (std::size_t s = 0; s < kStrata.size(); ++s)
        std::printf("%-8s %9.4f %9.4f %9.4f %9.4f %9.4f\n", std::string(kStrata[s]).c_str(), v[s].accuracy,
                    v[s].tar[0], id[s].rank[0], id[s].rank[1], id[s].rank[2]);
    std::printf("wrote %s\n", (out / "report.json").c_str());
    return 0;
}

// ablate -----------------------------------------------------------------

struct AblateArgs {
    ConfigArgs config;
    std::string data;
    std::string out;
    std::vector<std::string> sweeps;
    std::size_t seeds = 1;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

int cmd_ablate(const AblateArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig base = resolve_config(a.config, g);
    std::vector<SweepAxis> axes;
    for (const auto& s : a.sweeps) axes.push_back(parse_sweep(s));
    std::optional<Dataset> data;
    if (!a.data.empty()) data = load_dataset(a.data);

    AblationOptions options;
    options.seeds.clear();
    for (std::size_t i = 0; i < a.seeds; ++i) options.seeds.push_back(base.train.seed + i);
    options.dataset = data ? &*data : nullptr;
    options.jobs = a.jobs;
    options.on_run = [](const AblationRow& row, const SeedRun& run) {
        if (run.metrics)
            std::printf("%-40s seed %-4llu hard rank1 %.4f\n", point_label(row.settings).c_str(),
                        static_cast<unsigned long long>(run.seed), metric(*run.metrics, "identification.hard.rank1"));
        else
            std::fprintf(stderr, "%s seed %llu failed: %s\n", point_label(row.settings).c_str(),
                         static_cast<unsigned long long>(run.seed), run.error.c_str());
        std::fflush(stdout);
    };
    const AblationTable table = run_ablation(base, axes, options);

    const fs::path out = a.out;
    write_text(out / "config.snapshot", config_snapshot(base));
    write_text(out / "ablation.csv", ablation_csv(table));
    write_text(out / "runs.csv", ablation_runs_csv(table));

    const AblationRow* reference = nullptr;
    for (const auto& row : table.rows)
        if (!row.median.empty()) {
            reference = &row;
            break;
        }
    std::string summary;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        summary += "point " + std::to_string(i) + ": " + point_label(row.settings) + "\n";
        if (!reference || row.median.empty()) {
            summary += "  no successful runs\n";
            continue;
        }
        const auto deltas = compare_runs(reference->median, row.median);
        write_text(out / ("deltas_" + std::to_string(i) + ".csv"), deltas_csv(deltas));
        summary += deltas_text(deltas);
    }
    write_text(out / "deltas.txt", summary);

    std::printf("\n%-40s %6s %10s %10s %10s %10s\n", "point (median over seeds)", "failed", "hard r1", "easy r1",
                "easy acc", "hard acc");
    int status = 0;
    for (const auto& row : table.rows) {
        if (row.failures() && !status)
            for (const auto& r : row.runs)
                if (!r.metrics) {
                    status = r.exit_code;
                    break;
                }
        if (row.median.empty()) {
            std::printf("%-40s %6zu\n", point_label(row.settings).c_str(), row.failures());
            continue;
        }
        std::printf("%-40s %6zu %10.4f %10.4f %10.4f %10.4f\n", point_label(row.settings).c_str(), row.failures(),
                    metric(row.median, "identification.hard.rank1"), metric(row.median, "identification.easy.rank1"),
                    metric(row.median, "verification.easy.accuracy"), metric(row.median, "verification.hard.accuracy"));
    }
    std::printf("wrote %s (%.1f s)\n", (out / "ablation.csv").c_str(), seconds_since(t0));
    return status;
}

// report -----------------------------------------------------------------

struct CompareArgs {
    std::string a;
    std::string b;
    std::string out;
};

int cmd_compare(const CompareArgs& a) {
    const auto deltas = compare_runs(load_flat_report(a.a), load_flat_report(a.b));
    if (!a.out.empty()) write_text(a.out, deltas_csv(deltas));
    std::fputs(deltas_text(deltas).c_str(), stdout);
    return 0;
}

struct CurveArgs {
    std::string scales = "10,30,64";
    std::size_t classes = 10001;
    std::string preset = "softmax";
    double step = 5.0;
    std::string out;
};

int cmd_scale_curve(const CurveArgs& a) {
    const auto scales = parse_list("--scales", a.scales);
    const auto points = scale_curve(scales, a.classes, MarginParams::preset(a.preset), a.step);
    const std::string csv = scale_curve_csv(points);
    if (a.out.empty())
        std::fputs(csv.c_str(), stdout);
    else
        write_text(a.out, csv);
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"Boosted angular-margin embedding training on synthetic hardness-imbalanced data."};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer("Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.");
    Globals g;
    for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
    app.add_option("--seed", g.seed, "seed for generation and training (overrides gen.seed and train.seed; default 1)");

    const std::string keys = config_key_listing();

    GenerateArgs gen;
    auto* c_gen = app.add_subcommand("generate", "write a synthetic dataset and its manifest");
    add_config_args(c_gen, gen.config);
    c_gen->add_option("-o,--out", gen.out, "dataset file")->required();
    c_gen->add_option("--csv", gen.csv, "also export `sample_id,class_id,tier,v0..` CSV here");
    c_gen->footer(keys);

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "train a boosted ensemble into a run directory");
    add_config_args(c_train, train.config);
    c_train->add_option("-d,--data", train.data, "dataset file written by generate")->required();
    c_train->add_option("-o,--out", train.out, "run directory")->required();
    c_train->add_flag("--resume", train.resume, "reuse completed rounds already in the run directory");
    c_train->footer(keys);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "evaluate a run's ensemble on the held-out split");
    c_eval->add_option("-r,--run", ev.run, "run directory written by train")->required();
    c_eval->add_option("-d,--data", ev.data, "dataset file")->required();
    c_eval->add_option("-o,--out", ev.out, "report directory (default <run>/eval)");
    c_eval->add_option("--betas", ev.betas, "comma-separated ensemble weights replacing the manifest's");
    c_eval->add_option("--emit-roc", ev.roc, "write the overall `far,tar` ROC CSV here");

    AblateArgs ab;
    auto* c_ablate = app.add_subcommand("ablate", "train and evaluate every point of a parameter sweep");
    add_config_args(c_ablate, ab.config);
    c_ablate->add_option("-d,--data", ab.data, "fixed dataset; by default each seed generates its own");
    c_ablate->add_option("-o,--out", ab.out, "output directory")->required();
    c_ablate->add_option("--sweep", ab.sweeps, "key=v1,v2,... (repeatable; the cartesian product is run)");
    c_ablate->add_option("--seeds", ab.seeds, "seeds per point, counting up from --seed; medians are reported")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    c_ablate->add_option("-j,--jobs", ab.jobs, "parallel runs")->capture_default_str()->check(CLI::PositiveNumber);
    c_ablate->footer(keys);

    auto* c_report = app.add_subcommand("report", "compare reports and emit plot data");
    c_report->require_subcommand(1);
    CompareArgs cmp;
    auto* c_cmp = c_report->add_subcommand("compare", "metric-by-metric deltas (b - a) of two report.csv files");
    c_cmp->add_option("a", cmp.a, "first report.csv")->required();
    c_cmp->add_option("b", cmp.b, "second report.csv")->required();
    c_cmp->add_option("-o,--out", cmp.out, "write `metric,a,b,delta` CSV here");
    CurveArgs curve;
    auto* c_curve = c_report->add_subcommand(
        "scale-curve", "true-class probability vs angle for several scales, against orthogonal negatives");
    c_curve->add_option("--scales", curve.scales, "comma-separated scales")->capture_default_str();
    c_curve->add_option("--classes", curve.classes, "class count C (C - 1 negatives)")->capture_default_str();
    c_curve->add_option("--preset", curve.preset, "margin preset applied to the positive logit")->capture_default_str();
    c_curve->add_option("--step", curve.step, "angle step in degrees")->capture_default_str();
    c_curve->add_option("-o,--out", curve.out, "write `scale,theta_deg,prob` CSV here (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*c_gen) return cmd_generate(gen, g);
    if (*c_train) return cmd_train(train, g);
    if (*c_eval) return cmd_eval(ev, g);
    if (*c_ablate) return cmd_ablate(ab, g);
    if (*c_cmp) return cmd_compare(cmp);
    if (*c_curve) return cmd_scale_curve(curve);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
