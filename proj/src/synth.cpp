#include "hardboost/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "hardboost/errors.hpp"
#include "hardboost/io.hpp"
#include "hardboost/rng.hpp"

namespace hardboost {

void GenConfig::validate() const {
    if (num_classes < 5) throw ConfigError("gen.num_classes: need at least 5 classes to reserve a held-out split");
    if (samples_per_class < 2) throw ConfigError("gen.samples_per_class: need at least 2");
    if (input_dim < 2) throw ConfigError("gen.input_dim: need at least 2");
    if (!(easy_fraction > 0.0 && easy_fraction <= 1.0)) throw ConfigError("gen.easy_fraction: must lie in (0, 1]");
    if (static_cast<std::size_t>(std::floor(easy_fraction * static_cast<double>(samples_per_class))) == 0)
        throw ConfigError("gen.easy_fraction: every class needs at least one easy sample");
    if (!(easy_noise > 0.0) || !std::isfinite(easy_noise)) throw ConfigError("gen.easy_noise: must be positive");
    if (!(hard_noise > easy_noise) || !std::isfinite(hard_noise))
        throw ConfigError("gen.hard_noise: must exceed gen.easy_noise");
    if (identity_dim < 2 || identity_dim > input_dim)
        throw ConfigError("gen.identity_dim: must lie in [2, input_dim]");
    if (!(identity_noise > 0.0) || !std::isfinite(identity_noise))
        throw ConfigError("gen.identity_noise: must be positive");
}

std::string_view to_string(Tier tier) { return tier == Tier::Easy ? "easy" : "hard"; }

std::string_view to_string(TierPair tag) {
    switch (tag) {
        case TierPair::EasyEasy: return "easy-easy";
        case TierPair::Mixed: return "mixed";
        case TierPair::HardHard: return "hard-hard";
    }
    return "?";
}

namespace {

TierPair tag_of(Tier a, Tier b) {
    if (a == Tier::Easy && b == Tier::Easy) return TierPair::EasyEasy;
    if (a == Tier::Hard && b == Tier::Hard) return TierPair::HardHard;
    return TierPair::Mixed;
}

Vector gaussian_vector(std::size_t dim, CounterRng& rng, std::normal_distribution<double>& gauss) {
    Vector v(dim);
    for (auto& x : v) x = gauss(rng);
    return v;
}

std::vector<VerificationPair> make_pairs(const std::vector<LabeledSample>& samples, CounterRng rng) {
    std::vector<VerificationPair> positives;
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = i + 1; j < samples.size(); ++j)
            if (samples[i].class_id == samples[j].class_id)
                positives.push_back({i, j, true, tag_of(samples[i].tier, samples[j].tier)});

    if (positives.size() > kMaxPositivePairs) {
        CounterRng pick = rng.split("positives");
        std::shuffle(positives.begin(), positives.end(), pick);
        positives.resize(kMaxPositivePairs);
        std::sort(positives.begin(), positives.end(),
                  [](const auto& x, const auto& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    }

    std::vector<VerificationPair> pairs = positives;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    CounterRng neg = rng.split("negatives");
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    const std::size_t want = positives.size();
    std::size_t guard = 0;
    while (seen.size() < want) {
        if (++guard > 1000 * (want + 1)) throw DataError("cannot draw enough distinct impostor pairs");
        std::size_t a = pick(neg);
        std::size_t b = pick(neg);
        if (samples[a].class_id == samples[b].class_id) continue;
        if (a > b) std::swap(a, b);
        if (!seen.insert({a, b}).second) continue;
        pairs.push_back({a, b, false, tag_of(samples[a].tier, samples[b].tier)});
    }
    return pairs;
}

}  // namespace

Dataset generate(const GenConfig& config) {
    config.validate();
    const CounterRng root(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.config = config;
    ds.prototypes = Matrix(config.num_classes, config.input_dim);
    {
        CounterRng rng = root.split("prototypes");
        for (std::size_t c = 0; c < config.num_classes; ++c) {
            Vector v;
            do {
                v = gaussian_vector(config.identity_dim, rng, gauss);
            } while (l2_norm(v) < 1e-6);
            const Vector u = normalized(v);
            std::copy(u.begin(), u.end(), ds.prototypes.row(c).begin());
        }
    }

    const std::size_t n = config.samples_per_class;
    const auto num_easy = static_cast<std::size_t>(std::floor(config.easy_fraction * static_cast<double>(n)));
    const std::size_t train_classes = config.num_train_classes();

    CounterRng rng = root.split("samples");
    std::size_t next_id = 0;
    std::vector<LabeledSample> held_out;
    for (std::size_t c = 0; c < config.num_classes; ++c) {
        const auto proto = ds.prototypes.row(c);
        for (std::size_t s = 0; s < n; ++s) {
            const Tier tier = s < num_easy ? Tier::Easy : Tier::Hard;
            const double sigma = tier == Tier::Easy ? config.easy_noise : config.hard_noise;
            Vector x = gaussian_vector(config.input_dim, rng, gauss);
            for (std::size_t k = 0; k < x.size(); ++k)
                x[k] = proto[k] + sigma * (k < config.identity_dim ? config.identity_noise : 1.0) * x[k];
            LabeledSample sample{next_id++, normalized(x), c, tier};
            (c < train_classes ? ds.train : held_out).push_back(std::move(sample));
        }
    }

    ds.eval.samples = std::move(held_out);
    std::size_t last_class = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < ds.eval.samples.size(); ++i) {
        const auto& s = ds.eval.samples[i];
        if (s.class_id != last_class && s.tier == Tier::Easy) {
            ds.eval.gallery.push_back(i);
            last_class = s.class_id;
        } else {
            ds.eval.probes.push_back(i);
        }
    }
    ds.eval.pairs = make_pairs(ds.eval.samples, root.split("pairs"));
    return ds;
}

TrainingSet training_view(const Dataset& dataset) {
    TrainingSet set;
    set.num_classes = dataset.config.num_train_classes();
    set.inputs = Matrix(dataset.train.size(), dataset.config.input_dim);
    set.labels.reserve(dataset.train.size());
    for (std::size_t i = 0; i < dataset.train.size(); ++i) {
        const auto& s = dataset.train[i];
        if (s.sample_id != i) throw DataError("training sample ids must equal their position");
        std::copy(s.input.begin(), s.input.end(), set.inputs.row(i).begin());
        set.labels.push_back(s.class_id);
    }
    return set;
}

namespace {

constexpr std::string_view kMagic = "HBDS";

void write_sample(ByteWriter& w, const LabeledSample& s) {
    w.u64(s.sample_id);
    w.u64(s.class_id);
    w.u8(static_cast<std::uint8_t>(s.tier));
    w.f64s(s.input);
}

LabeledSample read_sample(ByteReader& r, std::size_t dim) {
    LabeledSample s;
    s.sample_id = r.u64();
    s.class_id = r.u64();
    const auto tier = r.u8();
    if (tier > 1) throw FormatError("bad tier tag", r.offset() - 1);
    s.tier = static_cast<Tier>(tier);
    s.input.resize(dim);
    r.f64s(s.input);
    return s;
}

std::uint64_t read_count(ByteReader& r, std::size_t limit, std::string_view what) {
    const auto n = r.u64();
    if (n > limit) throw FormatError("implausible " + std::string(what) + " count", r.offset() - 8);
    return n;
}

}  // namespace

Bytes encode_dataset(const Dataset& ds) {
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kDatasetVersion);
    const auto& c = ds.config;
    w.u64(c.num_classes);
    w.u64(c.samples_per_class);
    w.u64(c.input_dim);
    w.f64(c.easy_fraction);
    w.f64(c.easy_noise);
    w.f64(c.hard_noise);
    w.u64(c.identity_dim);
    w.f64(c.identity_noise);
    w.u64(c.seed);
    w.f64s(ds.prototypes.data());
    w.u64(ds.train.size());
    for (const auto& s : ds.train) write_sample(w, s);
    w.u64(ds.eval.samples.size());
    for (const auto& s : ds.eval.samples) write_sample(w, s);
    w.u64(ds.eval.pairs.size());
    for (const auto& p : ds.eval.pairs) {
        w.u64(p.a);
        w.u64(p.b);
        w.u8(p.same_class ? 1 : 0);
        w.u8(static_cast<std::uint8_t>(p.tag));
    }
    w.u64(ds.eval.gallery.size());
    for (auto g : ds.eval.gallery) w.u64(g);
    w.u64(ds.eval.probes.size());
    for (auto p : ds.eval.probes) w.u64(p);
    w.u64(fnv1a64(w.buffer()));
    return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kMagic, "dataset");
    const std::size_t version_at = r.offset();
    const auto version = r.u32();
    if (version != kDatasetVersion)
        throw UnsupportedVersionError("unsupported dataset version " + std::to_string(version) + " (expected " +
                                          std::to_string(kDatasetVersion) + ")",
                                      version_at);

    Dataset ds;
    auto& c = ds.config;
    c.num_classes = r.u64();
    c.samples_per_class = r.u64();
    c.input_dim = r.u64();
    c.easy_fraction = r.f64();
    c.easy_noise = r.f64();
    c.hard_noise = r.f64();
    c.identity_dim = r.u64();
    c.identity_noise = r.f64();
    c.seed = r.u64();
    const std::size_t limit = bytes.size();
    if (c.num_classes * c.input_dim * 8 > limit) throw FormatError("prototype block exceeds file size", r.offset());
    ds.prototypes = Matrix(c.num_classes, c.input_dim);
    r.f64s(ds.prototypes.data());

    const auto n_train = read_count(r, limit, "training sample");
    for (std::uint64_t i = 0; i < n_train; ++i) ds.train.push_back(read_sample(r, c.input_dim));
    const auto n_eval = read_count(r, limit, "held-out sample");
    for (std::uint64_t i = 0; i < n_eval; ++i) ds.eval.samples.push_back(read_sample(r, c.input_dim));
    const auto n_pairs = read_count(r, limit, "pair");
    for (std::uint64_t i = 0; i < n_pairs; ++i) {
        VerificationPair p;
        p.a = r.u64();
        p.b = r.u64();
        p.same_class = r.u8() != 0;
        const auto tag = r.u8();
        if (tag > 2) throw FormatError("bad tier-pair tag", r.offset() - 1);
        p.tag = static_cast<TierPair>(tag);
        if (p.a >= n_eval || p.b >= n_eval) throw FormatError("pair index out of range", r.offset() - 18);
        ds.eval.pairs.push_back(p);
    }
    const auto n_gallery = read_count(r, limit, "gallery");
    for (std::uint64_t i = 0; i < n_gallery; ++i) ds.eval.gallery.push_back(r.u64());
    const auto n_probes = read_count(r, limit, "probe");
    for (std::uint64_t i = 0; i < n_probes; ++i) ds.eval.probes.push_back(r.u64());

    const std::size_t checksum_at = r.offset();
    const auto stored = r.u64();
    r.expect_end("dataset");
    if (stored != fnv1a64(bytes.first(checksum_at))) throw CorruptionError("dataset checksum mismatch");
    return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    write_file(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("dataset not found: " + path.string());
    return decode_dataset(read_file(path));
}

void export_dataset_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ostringstream out;
    out << "sample_id,class_id,tier";
    for (std::size_t k = 0; k < dataset.config.input_dim; ++k) out << ",v" << k;
    out << '\n';
    auto emit = [&](const LabeledSample& s) {
        out << s.sample_id << ',' << s.class_id << ',' << to_string(s.tier);
        for (double v : s.input) out << ',' << format_double(v);
        out << '\n';
    };
    for (const auto& s : dataset.train) emit(s);
    for (const auto& s : dataset.eval.samples) emit(s);
    write_text(path, out.str());
}

}  // namespace hardboost
