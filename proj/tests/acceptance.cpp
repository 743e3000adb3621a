// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "hardboost/checkpoint.hpp"
#include "hardboost/config.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/experiment.hpp"
#include "hardboost/gradcheck.hpp"
#include "hardboost/io.hpp"
#include "hardboost/margin.hpp"
#include "hardboost/trainer.hpp"
#include "hardboost/weighting.hpp"

using namespace hardboost;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

fs::path out_dir;

fs::path fresh_dir(const std::string& name) {
    const auto d = out_dir / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto other = b / fs::relative(e.path(), a);
        if (!fs::exists(other) || read_file(e.path()) != read_file(other)) {
            why = fs::relative(e.path(), a).string() + " differs";
            return false;
        }
    }
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) {
            why = fs::relative(e.path(), b).string() + " only in one tree";
            return false;
        }
    why = std::to_string(files) + " files identical";
    return true;
}

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};
constexpr const char* kHardRank1 = "identification.hard.rank1";
constexpr const char* kEasyAcc = "verification.easy.accuracy";

double row_metric(const AblationTable& t, std::size_t row, const char* name) {
    if (t.rows[row].median.empty()) return std::numeric_limits<double>::quiet_NaN();
    return metric(t.rows[row].median, name);
}

std::string table_text(const AblationTable& t) {
    std::ostringstream s;
    for (const auto& row : t.rows) {
        s << fmt("      %-34s failed %zu/%zu", point_label(row.settings).c_str(), row.failures(), row.runs.size());
        if (!row.median.empty())
            s << fmt("  hard rank1 %.4f  easy acc %.4f  hard acc %.4f", metric(row.median, kHardRank1),
                     metric(row.median, kEasyAcc), metric(row.median, "verification.hard.accuracy"));
        s << "\n";
    }
    return s.str();
}

AblationTable sweep(const std::vector<std::string>& specs, const std::string& name) {
    std::vector<SweepAxis> axes;
    for (const auto& s : specs) axes.push_back(parse_sweep(s));
    AblationOptions opts;
    opts.seeds = kSeeds;
    opts.jobs = jobs();
    auto table = run_ablation(RunConfig{}, axes, opts);
    const auto dir = fresh_dir(name);
    write_text(dir / "ablation.csv", ablation_csv(table));
    write_text(dir / "runs.csv", ablation_runs_csv(table));
    return table;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    CounterRng rng(2024);
    std::normal_distribution<double> g;
    double worst = 0.0;
    const int instances = 24;
    for (int k = 0; k < instances; ++k) {
        CounterRng r = rng.split(static_cast<std::uint64_t>(k));
        auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(r() % (hi - lo + 1)); };
        const std::size_t in = pick(3, 6), embed = pick(3, 5), classes = pick(3, 7), n = pick(2, 8);
        std::vector<std::size_t> hidden(pick(1, 2));
        for (auto& h : hidden) h = pick(3, 6);
        const auto model = init_model({in, hidden, embed, classes}, r.split("init"));

        const MarginParams margin{1.0 + 0.5 * r.uniform() * (k % 3 == 0), 0.5 * r.uniform(), 0.35 * r.uniform(),
                                  10.0 + 54.0 * r.uniform()};
        BatchInputs batch{Matrix(n, in), {}, {}, {}, margin};
        HardnessStats stats;
        std::vector<double> weights(n);
        for (auto& w : weights) w = 0.1 + 4.9 * r.uniform();
        stats = update_running_stats(stats, weights);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& x : batch.inputs.row(i)) x = g(r);
            batch.labels.push_back(static_cast<std::size_t>(r() % classes));
            batch.weights.push_back(weights[i]);
            batch.scales.push_back(adapt_scale(margin.base_scale, normalize_hardness(weights[i], stats)));
        }
        const auto report = grad_check(
            model, [&](const EmbeddingModel& m) { return batch_loss(m, batch); },
            [&](const EmbeddingModel& m) { return batch_gradient(m, batch); });
        worst = std::max(worst, report.max_rel_error);
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-5 && secs < 30.0,
            fmt("max relative error %.3g over %d random instances (limit 1e-5), %.2f s (limit 30 s)", worst, instances,
                secs)};
}

Outcome algebraic_identities() {
    CounterRng rng(7);
    double eq8 = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double d = 0.5 + 4.5 * rng.uniform();
        const double theta = std::numbers::pi * rng.uniform();
        const MarginParams p{1.0 + 0.5 * rng.uniform(), 0.5 * rng.uniform(), 0.5 * rng.uniform(),
                             10.0 + 54.0 * rng.uniform()};
        const double lhs = std::pow(std::exp(margin_logit(theta, p, p.base_scale, true)), d);
        const auto e = effective_margin_decomposition(d, p);
        const double rhs = std::exp(e.scale * std::cos(p.m_s * theta + p.m_a) - e.cosine_margin);
        eq8 = std::max(eq8, rel_err(lhs, rhs));
    }

    // Feature (cos t, 0, ..., 0, sin t) against basis centers e_0..e_{C-1}: every negative cosine is exactly 0.
    bool denominator_exact = true;
    for (std::size_t c : {2u, 10u, 101u, 1001u}) {
        for (const auto& p : {MarginParams::arcface(64), MarginParams::cosface(30), MarginParams::adaface_like(30)}) {
            for (double theta : {0.0, 0.5, 1.2, 2.5}) {
                Matrix feature(1, c + 1), centers(c, c + 1);
                feature(0, 0) = std::cos(theta);
                feature(0, c) = std::sin(theta);
                for (std::size_t j = 0; j < c; ++j) centers(j, j) = 1.0;
                const std::size_t label = 0;
                const double scale = p.base_scale;
                const auto rows = forward_logits(feature, centers, std::span(&label, 1), p, std::span(&scale, 1));
                denominator_exact =
                    denominator_exact && approx_denominator(rows[0].logits[0], c) == true_denominator(rows[0]);
            }
        }
    }

    double composition = 0.0;
    for (double alpha : {0.05, 0.1, 0.3, 0.5}) {
        WeightTable t = init_table(200, alpha);
        for (auto& w : t.weights) w = 0.2 + 5.0 * rng.uniform();
        std::vector<double> p(200), q(200), pq(200);
        for (std::size_t i = 0; i < 200; ++i) {
            p[i] = 1e-4 + (1 - 1e-4) * rng.uniform();
            q[i] = 1e-4 + (1 - 1e-4) * rng.uniform();
            pq[i] = p[i] * q[i];
        }
        const auto twice = update_weights(update_weights(t, p), q);
        const auto once = update_weights(t, pq);
        for (std::size_t i = 0; i < 200; ++i) composition = std::max(composition, rel_err(twice.weights[i], once.weights[i]));
    }
    return {eq8 < 1e-12 && denominator_exact && composition < 1e-12,
            fmt("margin-as-weight identity max rel err %.3g on 1000 tuples; orthogonal denominator %s; "
                "two-step weight update vs one step max rel err %.3g (limits 1e-12)",
                eq8, denominator_exact ? "exact" : "NOT exact", composition)};
}

struct Shared {
    Dataset dataset;
    fs::path v1_dir;
    fs::path base_dir;
};

Shared& shared() {
    static Shared s = [] {
        Shared out;
        out.dataset = generate(GenConfig{});
        const auto data = training_view(out.dataset);
        out.v1_dir = fresh_dir("run_v1");
        out.base_dir = fresh_dir("run_baseline");
        TrainConfig v1;
        v1.variant = Variant::V1;
        boost_train(data, v1, {out.v1_dir, false, {}});
        TrainConfig base;
        base.variant = Variant::Baseline;
        boost_train(data, base, {out.base_dir, false, {}});
        return out;
    }();
    return s;
}

Outcome round_one_neutrality() {
    const auto& s = shared();
    const bool identical =
        read_file(s.v1_dir / "round_1/checkpoint.bin") == read_file(s.base_dir / "round_1/checkpoint.bin");

    HardnessStats stats;
    stats.ema_momentum = 0.99;
    bool neutral = true;
    std::size_t checked = 0;
    const TrainConfig config;
    const std::size_t n = s.dataset.train.size();
    for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::vector<double> w(std::min(config.batch_size, n - start), 1.0);
        stats = update_running_stats(stats, w);
        for (double d : w) {
            const double d_hat = normalize_hardness(d, stats);
            neutral = neutral && d_hat == 0.0 && adapt_scale(config.margin.base_scale, d_hat) == config.margin.base_scale;
            ++checked;
        }
    }
    return {identical && neutral, fmt("round-1 checkpoints of Baseline and V1 %s; uniform weights give d_hat = 0 and "
                                      "s' = s for %s of %zu samples",
                                      identical ? "bit-identical" : "DIFFER", neutral ? "all" : "NOT all", checked)};
}

Outcome scale_properties() {
    const auto softmax = MarginParams::preset("softmax");
    const double deg = std::numbers::pi / 180.0;
    const double p0_10 = orthogonal_negative_prob(0.0, 10, 10001, softmax);
    const double p0_64 = orthogonal_negative_prob(0.0, 64, 10001, softmax);
    const double p80_64 = orthogonal_negative_prob(80.0 * deg, 64, 10001, softmax);
    return {p0_10 < 0.7 && p0_64 > 1.0 - 1e-6 && p80_64 > 0.85,
            fmt("C=10001: p(0; s=10) = %.4f (< 0.7), 1 - p(0; s=64) = %.3g (< 1e-6), p(80 deg; s=64) = %.4f (> 0.85)",
                p0_10, 1.0 - p0_64, p80_64)};
}

Outcome hardness_discovery() {
    const auto& s = shared();
    const auto model = load_checkpoint(s.base_dir / "round_1/checkpoint.bin").model;
    const auto probs = compute_dataset_probs(model, training_view(s.dataset), TrainConfig{}.margin);
    std::vector<double> easy, hard;
    for (std::size_t i = 0; i < probs.size(); ++i)
        (s.dataset.train[i].tier == Tier::Easy ? easy : hard).push_back(probs[i]);
    auto mean_se = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
    };
    const auto [me, se_e] = mean_se(easy);
    const auto [mh, se_h] = mean_se(hard);
    const double se = std::hypot(se_e, se_h);
    const double z = (me - mh) / se;
    return {z >= 3.0, fmt("mean p easy %.4f (n=%zu), hard %.4f (n=%zu); gap %.4f = %.1f standard errors (need >= 3)",
                          me, easy.size(), mh, hard.size(), me - mh, z)};
}

std::optional<AblationTable> variant_table;

const AblationTable& variants() {
    if (!variant_table) variant_table = sweep({"train.variant=Baseline,V1,V2,V3"}, "variants");
    return *variant_table;
}

Outcome directional_variants() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& t = variants();
    const double secs = seconds_since(t0);
    std::printf("    variant sweep, %zu seeds, median (%.0f s on %u threads):\n%s", kSeeds.size(), secs, jobs(),
                table_text(t).c_str());
    const double b = row_metric(t, 0, kHardRank1), v1 = row_metric(t, 1, kHardRank1), v2 = row_metric(t, 2, kHardRank1),
                 v3 = row_metric(t, 3, kHardRank1);
    const double gain = 100.0 * (v1 - b);
    return {gain >= 1.0 && v1 > v2 && v1 > v3,
            fmt("hard-probe rank-1: V1 %.4f, Baseline %.4f (V1 - Baseline = %+.2f pp, need >= 1.0); V2 %.4f (V1 > V2: %s); "
                "V3 %.4f (V1 > V3: %s)",
                v1, b, gain, v2, v1 > v2 ? "yes" : "no", v3, v1 > v3 ? "yes" : "no")};
}

Outcome easy_preservation() {
    const auto& t = variants();
    const double b = row_metric(t, 0, kEasyAcc), v1 = row_metric(t, 1, kEasyAcc);
    const double diff = 100.0 * (v1 - b);
    return {std::abs(diff) <= 0.5, fmt("easy-easy verification accuracy: V1 %.4f, Baseline %.4f (|diff| = %.2f pp, "
                                       "limit 0.5)",
                                       v1, b, std::abs(diff))};
}

Outcome alpha_table() {
    const auto t = sweep({"train.alpha=0.05,0.1,0.3,0.5"}, "alpha");
    std::printf("    alpha sweep (V1), %zu seeds, median:\n%s", kSeeds.size(), table_text(t).c_str());
    bool complete = t.rows.size() == 4;
    for (const auto& row : t.rows) complete = complete && row.failures() == 0 && !row.median.empty();
    return {complete, fmt("%zu-row table written to %s", t.rows.size(), (out_dir / "alpha/ablation.csv").c_str())};
}

Outcome orthogonality() {
    const auto& base = variants();
    const auto t = sweep({"margin.preset=cosface,arcface", "train.variant=Baseline,V1"}, "presets");
    std::printf("    margin presets, %zu seeds, median (adaface from the variant sweep):\n%s", kSeeds.size(),
                table_text(t).c_str());
    struct Gain {
        const char* name;
        double pp;
    };
    const std::vector<Gain> gains = {
        {"cosface", 100.0 * (row_metric(t, 1, kHardRank1) - row_metric(t, 0, kHardRank1))},
        {"arcface", 100.0 * (row_metric(t, 3, kHardRank1) - row_metric(t, 2, kHardRank1))},
        {"adaface", 100.0 * (row_metric(base, 1, kHardRank1) - row_metric(base, 0, kHardRank1))},
    };
    int holding = 0;
    std::string detail = "V1 - Baseline hard-probe rank-1:";
    for (const auto& g : gains) {
        holding += g.pp >= 1.0;
        detail += fmt(" %s %+.2f pp%s", g.name, g.pp, g.pp >= 1.0 ? " (holds)" : "");
    }
    detail += fmt("; %d of 3 presets reach +1.0 pp (need 2)", holding);
    return {holding >= 2, detail};
}

Outcome metric_oracles() {
    auto brute_tar = [](const std::vector<double>& gen, const std::vector<double>& imp, double target) {
        std::vector<double> ts = gen;
        ts.insert(ts.end(), imp.begin(), imp.end());
        ts.push_back(std::numeric_limits<double>::infinity());
        ts.push_back(-std::numeric_limits<double>::infinity());
        double best = 0.0;
        for (double t : ts) {
            const double far = static_cast<double>(std::count_if(imp.begin(), imp.end(), [&](double x) { return x >= t; })) /
                               static_cast<double>(imp.size());
            const double tar = static_cast<double>(std::count_if(gen.begin(), gen.end(), [&](double x) { return x >= t; })) /
                               static_cast<double>(gen.size());
            if (far <= target) best = std::max(best, tar);
        }
        return best;
    };
    auto brute_rank = [](const std::vector<double>& s, std::size_t truth) {
        std::vector<std::size_t> order(s.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] != s[b] ? s[a] > s[b] : a < b; });
        return static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin()) + 1;
    };

    std::size_t tar_cases = 0, rank_cases = 0, mismatches = 0;
    const bool example = [&] {
        const std::vector<double> s = {0.9, 0.8, 0.7, 0.2, 0.6, 0.5, 0.4, 0.3};
        const std::vector<char> g = {1, 1, 1, 1, 0, 0, 0, 0};
        return tar_at_far(roc_curve(s, g), 0.25) == 0.75;
    }();
    CounterRng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t ng = 1 + rng() % 5, ni = 1 + rng() % 5;
        std::vector<double> gen(ng), imp(ni);
        for (auto& x : gen) x = static_cast<double>(rng() % 7) / 6.0;
        for (auto& x : imp) x = static_cast<double>(rng() % 7) / 6.0;
        std::vector<double> scores = gen;
        scores.insert(scores.end(), imp.begin(), imp.end());
        std::vector<char> labels(ng, 1);
        labels.resize(ng + ni, 0);
        const auto roc = roc_curve(scores, labels);
        for (double far : {0.0, 0.2, 0.25, 1.0 / 3, 0.5, 1.0}) {
            ++tar_cases;
            mismatches += tar_at_far(roc, far) != brute_tar(gen, imp, far);
        }
        const auto v = verification_stats(scores, labels);
        for (std::size_t f = 0; f < kFarTargets.size(); ++f) {
            ++tar_cases;
            mismatches += v.tar[f] != brute_tar(gen, imp, kFarTargets[f]);
        }

        std::vector<double> row(1 + rng() % 10);
        for (auto& x : row) x = static_cast<double>(rng() % 5);
        const std::size_t truth = rng() % row.size();
        ++rank_cases;
        mismatches += rank_of(row, truth) != brute_rank(row, truth);
    }

    // Rescaling every beta by c > 0 on a small trained ensemble.
    GenConfig gen;
    gen.num_classes = 12;
    gen.samples_per_class = 40;
    const Dataset d = generate(gen);
    TrainConfig tc;
    tc.epochs_per_round = 4;
    tc.sgd.lr_drop_epochs = {2, 3};
    const auto ens = boost_train(training_view(d), tc).ensemble;
    const auto reference = flatten(evaluate(ens, d.eval));
    bool invariant = true;
    for (double c : {0.25, 3.0, 17.5, 1e3}) {
        Ensemble scaled = ens;
        for (auto& b : scaled.betas) b *= c;
        invariant = invariant && flatten(evaluate(scaled, d.eval)) == reference;
    }
    return {example && mismatches == 0 && invariant,
            fmt("worked TAR example %s; %zu TAR and %zu rank cases vs brute force, %zu mismatches; report under beta "
                "rescaling %s",
                example ? "= 0.75" : "WRONG", tar_cases, rank_cases, mismatches, invariant ? "unchanged" : "CHANGED")};
}

Outcome determinism_and_persistence() {
    const auto& s = shared();
    const auto data = training_view(s.dataset);
    std::string detail;
    bool ok = true;

    const auto again = fresh_dir("run_v1_again");
    boost_train(data, TrainConfig{}, {again, false, {}});
    std::string why;
    const bool same_run = same_tree(s.v1_dir, again, why);
    ok = ok && same_run;
    detail += "rerun " + std::string(same_run ? "byte-identical" : "DIFFERS") + " (" + why + ")";

    const auto ds_dir = fresh_dir("roundtrip");
    save_dataset(ds_dir / "d.bin", s.dataset);
    const Dataset back = load_dataset(ds_dir / "d.bin");
    const bool ds_ok = back == s.dataset && encode_dataset(back) == read_file(ds_dir / "d.bin");
    const auto ckpt_bytes = read_file(s.v1_dir / "round_2/checkpoint.bin");
    const bool ck_ok = encode_checkpoint(load_checkpoint(s.v1_dir / "round_2/checkpoint.bin")) == ckpt_bytes;
    WeightTableMeta meta;
    const auto table = load_weight_table(s.v1_dir / "round_2/weights.csv", &meta);
    save_weight_table(ds_dir / "w.csv", table, meta);
    const bool wt_ok = read_file(ds_dir / "w.csv") == read_file(s.v1_dir / "round_2/weights.csv") &&
                       load_weight_table(ds_dir / "w.csv") == table;
    ok = ok && ds_ok && ck_ok && wt_ok;
    detail += fmt("; round-trips dataset %s, checkpoint %s, weight table %s", ds_ok ? "exact" : "BROKEN",
                  ck_ok ? "exact" : "BROKEN", wt_ok ? "exact" : "BROKEN");

    const auto resumed = fresh_dir("run_v1_resumed");
    TrainConfig first;
    first.rounds = 1;
    boost_train(data, first, {resumed, false, {}});
    boost_train(data, TrainConfig{}, {resumed, true, {}});
    const bool same_resume = same_tree(s.v1_dir, resumed, why);
    ok = ok && same_resume;
    detail += "; resume after round 1 " + std::string(same_resume ? "matches" : "DIFFERS from") + " the straight run";
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    out_dir = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
    fs::create_directories(out_dir);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient fidelity", gradient_fidelity},
        {"algebraic identities", algebraic_identities},
        {"round-1 neutrality", round_one_neutrality},
        {"scale properties", scale_properties},
        {"hardness discovery", hardness_discovery},
        {"variant ordering on hard probes", directional_variants},
        {"easy-set preservation", easy_preservation},
        {"alpha ablation table", alpha_table},
        {"margin-preset orthogonality", orthogonality},
        {"metric oracles", metric_oracles},
        {"determinism and persistence", determinism_and_persistence},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%-4s %s  %s: %s [%.1f s]\n", ("C" + std::to_string(i + 1)).c_str(), o.pass ? "PASS" : "FAIL",
                    criteria[i].first, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
