#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hardboost/config.hpp"
#include "hardboost/experiment.hpp"
#include "hardboost/io.hpp"
#include "test_util.hpp"

using namespace hardboost;
namespace fs = std::filesystem;

namespace {

const char* const kTinyConfig =
    "# small enough for a unit test\n"
    "gen.num_classes = 10\n"
    "gen.samples_per_class = 30\n"
    "gen.input_dim = 12\n"
    "gen.identity_dim = 8\n"
    "train.epochs_per_round = 4\n"
    "train.lr_drop_epochs = 2,3\n"
    "train.batch_size = 32\n"
    "model.hidden_width = 16\n"
    "model.embed_dim = 8\n";

struct Result {
    int code;
    std::string out;
};

Result run(const std::string& args, const fs::path& dir) {
    const fs::path log = dir / "cli.log";
    const std::string cmd = std::string(HARDBOOST_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, fs::exists(log) ? read_text(log) : ""};
}

fs::path tiny_config(const fs::path& dir) {
    write_text(dir / "tiny.cfg", kTinyConfig);
    return dir / "tiny.cfg";
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("config text parsing") {
    RunConfig c;
    apply_config_text(c, "train.alpha = 0.3\n\n# comment\ntrain.variant = V3\ngen.seed = 9\n");
    CHECK(c.train.alpha == 0.3);
    CHECK(c.train.variant == Variant::V3);
    CHECK(c.gen.seed == 9);
    CHECK(c.train.seed == 1);

    RunConfig d;
    CHECK_THROWS_WITH_AS(apply_config_text(d, "train.alpah = 1\n", "x.cfg"), doctest::Contains("train.alpah"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_text(d, "train.alpha = 1\ntrain.alpha = 2\n", "x.cfg"),
                         doctest::Contains("x.cfg:2"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_setting(d, "train.alpha", "abc"), doctest::Contains("train.alpha"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(d, "no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(apply_setting(d, "train.variant", "V9"), ConfigError);
}

TEST_CASE("snapshot round-trips every key") {
    RunConfig c;
    apply_config_text(c, kTinyConfig);
    apply_setting(c, "train.betas", "1,0.25");
    apply_setting(c, "margin.preset", "arcface");
    apply_setting(c, "train.alpha", "0.123456789012345");
    RunConfig back;
    apply_config_text(back, config_snapshot(c));
    CHECK(config_snapshot(back) == config_snapshot(c));
    CHECK(back.train.margin == c.train.margin);
    CHECK(back.train.betas == c.train.betas);
    CHECK(back.train.alpha == c.train.alpha);
    for (const auto& k : config_keys())
        if (k.key != "margin.preset") CHECK(config_snapshot(c).find(std::string(k.key) + " = ") != std::string::npos);
}

TEST_CASE("margin presets") {
    RunConfig c;
    apply_setting(c, "margin.scale", "64");
    apply_setting(c, "margin.preset", "cosface");
    CHECK(c.train.margin == MarginParams::cosface(64));
    apply_setting(c, "margin.preset", "arcface");
    CHECK(c.train.margin == MarginParams::arcface(64));
    apply_setting(c, "margin.preset", "adaface");
    CHECK(c.train.margin == MarginParams::adaface_like(64));
    CHECK_THROWS_AS(apply_setting(c, "margin.preset", "sphereface"), ConfigError);
}

TEST_CASE("sweep parsing and expansion") {
    const auto a = parse_sweep("train.alpha=0.05,0.1,0.3");
    CHECK(a.key == "train.alpha");
    CHECK(a.values == std::vector<std::string>{"0.05", "0.1", "0.3"});
    CHECK_THROWS_AS(parse_sweep("train.alpha"), ConfigError);
    CHECK_THROWS_AS(parse_sweep("train.bogus=1"), ConfigError);
    CHECK_THROWS_AS(parse_sweep("train.alpha=x"), ConfigError);

    const std::vector<SweepAxis> axes = {a, parse_sweep("train.variant=Baseline,V1")};
    const auto points = expand_sweep(axes);
    REQUIRE(points.size() == 6);
    CHECK(point_label(points[0]) == "train.alpha=0.05 train.variant=Baseline");
    CHECK(point_label(points[1]) == "train.alpha=0.05 train.variant=V1");
    CHECK(point_label(points[5]) == "train.alpha=0.3 train.variant=V1");
    CHECK(expand_sweep(std::span<const SweepAxis>{}).size() == 1);
    CHECK(point_label(expand_sweep(std::span<const SweepAxis>{})[0]) == "base");
}

TEST_CASE("median") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({5.0, 1.0, 3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS(median({}));
}

TEST_CASE("ablation collects failures and keeps going") {
    RunConfig base;
    apply_config_text(base, kTinyConfig);
    const std::vector<SweepAxis> axes = {parse_sweep("train.lr=0.1,1e300")};
    AblationOptions opts;
    opts.seeds = {1, 2};
    const auto table = run_ablation(base, axes, opts);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].failures() == 0);
    CHECK(table.rows[1].failures() == 2);
    CHECK(table.rows[1].runs[0].exit_code == 4);
    CHECK_FALSE(table.rows[0].median.empty());
    const std::string csv = ablation_csv(table);
    CHECK(csv.starts_with("point,train.lr,seeds,failed,"));
    CHECK(lines(csv) == 3);
    CHECK(lines(ablation_runs_csv(table)) == 3);
}

TEST_CASE("scale curve output") {
    const std::vector<double> scales = {10, 64};
    const auto pts = scale_curve(scales, 101, MarginParams::preset("softmax"), 10.0);
    CHECK(pts.size() == 2 * 19);
    CHECK(pts[0].theta_deg == 0.0);
    CHECK(pts[18].theta_deg == 180.0);
    for (std::size_t i = 1; i < 19; ++i) CHECK(pts[i].prob <= pts[i - 1].prob);
    CHECK(scale_curve_csv(pts).starts_with("scale,theta_deg,prob\n"));
}

TEST_CASE("generate") {
    const auto dir = testutil::scratch_dir("cli_generate");
    auto r = run("generate -o " + (dir / "a.bin").string(), dir);
    REQUIRE(r.code == 0);
    const Dataset d = load_dataset(dir / "a.bin");
    CHECK(d.config == GenConfig{});
    const std::string manifest = read_text(dir / "a.bin.manifest");
    CHECK(manifest.find("dataset.checksum") != std::string::npos);
    CHECK(manifest.find("gen.num_classes = 62") != std::string::npos);

    const Bytes first = read_file(dir / "a.bin");
    fs::remove(dir / "a.bin");
    fs::remove(dir / "a.bin.manifest");
    REQUIRE(run("generate -o " + (dir / "a.bin").string(), dir).code == 0);
    CHECK(read_file(dir / "a.bin") == first);
    CHECK(read_text(dir / "a.bin.manifest") == manifest);
    REQUIRE(run("--seed 2 generate -o " + (dir / "c.bin").string(), dir).code == 0);
    CHECK_FALSE(read_file(dir / "a.bin") == read_file(dir / "c.bin"));

    r = run("generate --set gen.easy_fraction=1.2 -o " + (dir / "bad.bin").string(), dir);
    CHECK(r.code == 2);
    CHECK(r.out.find("gen.easy_fraction") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "bad.bin"));

    r = run("generate --set gen.nope=1 -o " + (dir / "bad.bin").string(), dir);
    CHECK(r.code == 2);
    CHECK(run("generate", dir).code == 2);
}

TEST_CASE("train, eval and resume") {
    const auto dir = testutil::scratch_dir("cli_train");
    const auto cfg = tiny_config(dir).string();
    const auto data = (dir / "d.bin").string();
    REQUIRE(run("generate -c " + cfg + " -o " + data, dir).code == 0);

    auto r = run("train -c " + cfg + " --set train.variant=Baseline -d " + data + " -o " + (dir / "base").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "base/round_1/checkpoint.bin"));
    CHECK_FALSE(fs::exists(dir / "base/round_2"));
    CHECK(fs::exists(dir / "base/run.manifest"));
    CHECK(fs::exists(dir / "base/config.snapshot"));

    REQUIRE(run("train -c " + cfg + " -d " + data + " -o " + (dir / "v1").string(), dir).code == 0);
    for (const char* f : {"round_1/checkpoint.bin", "round_1/weights.csv", "round_1/hardness.csv", "round_2/checkpoint.bin",
                          "round_2/weights.csv", "round_2/metrics.csv", "ensemble.manifest", "run.manifest"})
        CHECK(fs::exists(dir / "v1" / f));
    CHECK(read_text(dir / "v1/ensemble.manifest").find("model.2.beta = 0.1") != std::string::npos);

    // Same command, same bytes.
    fs::rename(dir / "v1", dir / "v1_first");
    REQUIRE(run("train -c " + cfg + " -d " + data + " -o " + (dir / "v1").string(), dir).code == 0);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "v1_first"))
        if (e.is_regular_file()) {
            ++files;
            CHECK(read_file(e.path()) == read_file(dir / "v1" / fs::relative(e.path(), dir / "v1_first")));
        }
    CHECK(files >= 10);

    // Resume after a one-round run reproduces the straight run.
    REQUIRE(run("train -c " + cfg + " --set train.rounds=1 -d " + data + " -o " + (dir / "res").string(), dir).code == 0);
    CHECK(run("train -c " + cfg + " -d " + data + " -o " + (dir / "res").string() + " --resume", dir).code == 2);
    fs::remove(dir / "res/config.snapshot");
    REQUIRE(run("train -c " + cfg + " -d " + data + " -o " + (dir / "res").string() + " --resume", dir).code == 0);
    CHECK(read_file(dir / "res/round_2/checkpoint.bin") == read_file(dir / "v1/round_2/checkpoint.bin"));

    r = run("train -c " + cfg + " -d " + (dir / "missing.bin").string() + " -o " + (dir / "x").string(), dir);
    CHECK(r.code == 3);

    // Betas (1, 0) reduce the V1 ensemble to its first model, which equals the Baseline model.
    REQUIRE(run("eval -r " + (dir / "base").string() + " -d " + data, dir).code == 0);
    r = run("eval -r " + (dir / "v1").string() + " -d " + data + " --betas 1,0 -o " + (dir / "v1_eval10").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(read_text(dir / "v1_eval10/report.csv") == read_text(dir / "base/eval/report.csv"));
    CHECK(read_text(dir / "v1_eval10/report.json") == read_text(dir / "base/eval/report.json"));

    r = run("eval -r " + (dir / "v1").string() + " -d " + data + " --emit-roc " + (dir / "roc.csv").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("rank1") != std::string::npos);
    CHECK(read_text(dir / "roc.csv").starts_with("far,tar\n"));
    CHECK_FALSE(read_text(dir / "v1/eval/report.csv") == read_text(dir / "base/eval/report.csv"));
    CHECK(run("eval -r " + (dir / "v1").string() + " -d " + data + " --betas 1", dir).code == 2);

    r = run("report compare " + (dir / "base/eval/report.csv").string() + " " + (dir / "v1/eval/report.csv").string() +
                " -o " + (dir / "delta.csv").string(),
            dir);
    CHECK(r.code == 0);
    CHECK(read_text(dir / "delta.csv").starts_with("metric,a,b,delta\n"));

    // A damaged checkpoint is a data error.
    Bytes b = read_file(dir / "base/round_1/checkpoint.bin");
    b[b.size() / 2] ^= 0xff;
    write_file(dir / "base/round_1/checkpoint.bin", b);
    CHECK(run("eval -r " + (dir / "base").string() + " -d " + data, dir).code == 3);
}

TEST_CASE("ablate sweeps") {
    const auto dir = testutil::scratch_dir("cli_ablate");
    const auto cfg = tiny_config(dir).string();

    auto r = run("ablate -c " + cfg + " --sweep train.alpha=0.05,0.1,0.3,0.5 -o " + (dir / "alpha").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(lines(read_text(dir / "alpha/ablation.csv")) == 5);
    CHECK(fs::exists(dir / "alpha/deltas.txt"));

    r = run("ablate -c " + cfg + " --sweep train.variant=Baseline,V1,V2,V3 --seeds 2 -o " + (dir / "var").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(lines(read_text(dir / "var/ablation.csv")) == 5);
    CHECK(lines(read_text(dir / "var/runs.csv")) == 9);

    r = run("ablate -c " + cfg + " --sweep margin.preset=cosface,arcface,adaface -o " + (dir / "pre").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(lines(read_text(dir / "pre/ablation.csv")) == 4);

    CHECK(run("ablate -c " + cfg + " --sweep train.alpha=-1 -o " + (dir / "neg").string(), dir).code == 2);
}

TEST_CASE("scale-curve and help") {
    const auto dir = testutil::scratch_dir("cli_misc");
    auto r = run("report scale-curve --scales 10,64 --step 45 -o " + (dir / "s.csv").string(), dir);
    REQUIRE(r.code == 0);
    CHECK(lines(read_text(dir / "s.csv")) == 1 + 2 * 5);

    r = run("train --help", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("train.alpha = 0.1") != std::string::npos);
    CHECK(r.out.find("margin.scale = 30") != std::string::npos);
    CHECK(run("--help", dir).code == 0);
    CHECK(run("bogus", dir).code == 2);
}
