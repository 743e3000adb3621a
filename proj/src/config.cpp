#include "hardboost/config.hpp"

#include <charconv>
#include <functional>
#include <set>

#include "hardboost/errors.hpp"
#include "hardboost/io.hpp"

namespace hardboost {

namespace {

struct Field {
    ConfigKey meta;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

double to_double(std::string_view key, std::string_view v) {
    try {
        return parse_double(v);
    } catch (const DataError&) {
        throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
    }
}

std::int64_t to_int(std::string_view key, std::string_view v) {
    try {
        return parse_int(v);
    } catch (const DataError&) {
        throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
    }
}

std::size_t to_count(std::string_view key, std::string_view v) {
    const auto n = to_int(key, v);
    if (n < 0) throw ConfigError(std::string(key) + ": must be non-negative");
    return static_cast<std::size_t>(n);
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

/// Shortest text that parses back to the same double.
std::string shortest(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += fmt(xs[i]);
    }
    return out;
}

std::vector<std::string_view> list_items(std::string_view v) {
    std::vector<std::string_view> out;
    if (trim(v).empty()) return out;
    for (auto part : split(v, ',')) out.push_back(trim(part));
    return out;
}

#define HB_DOUBLE(KEY, HELP, EXPR)                                                               \
    Field {                                                                                      \
        {KEY, HELP}, [](RunConfig& c, std::string_view v) { c.EXPR = to_double(KEY, v); },       \
            [](const RunConfig& c) { return shortest(c.EXPR); }                             \
    }
#define HB_COUNT(KEY, HELP, EXPR)                                                                \
    Field {                                                                                      \
        {KEY, HELP}, [](RunConfig& c, std::string_view v) { c.EXPR = to_count(KEY, v); },        \
            [](const RunConfig& c) { return std::to_string(c.EXPR); }                            \
    }
#define HB_INT(KEY, HELP, EXPR)                                                                  \
    Field {                                                                                      \
        {KEY, HELP}, [](RunConfig& c, std::string_view v) { c.EXPR = static_cast<int>(to_int(KEY, v)); }, \
            [](const RunConfig& c) { return std::to_string(c.EXPR); }                            \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        HB_COUNT("gen.num_classes", "identities, training plus held-out (one fifth held out)", gen.num_classes),
        HB_COUNT("gen.samples_per_class", "samples generated per identity", gen.samples_per_class),
        HB_COUNT("gen.input_dim", "input feature dimension", gen.input_dim),
        HB_DOUBLE("gen.easy_fraction", "fraction of easy-tier samples per class", gen.easy_fraction),
        HB_DOUBLE("gen.easy_noise", "noise level of easy-tier samples", gen.easy_noise),
        HB_DOUBLE("gen.hard_noise", "noise level of hard-tier samples", gen.hard_noise),
        HB_COUNT("gen.identity_dim", "leading coordinates that carry identity", gen.identity_dim),
        HB_DOUBLE("gen.identity_noise", "relative noise inside the identity subspace", gen.identity_noise),
        HB_COUNT("gen.seed", "generator seed (--seed sets this and train.seed)", gen.seed),

        HB_INT("train.epochs_per_round", "epochs of a round trained from initialization", train.epochs_per_round),
        HB_INT("train.finetune_epochs", "epochs of later rounds; -1 uses train.epochs_per_round", train.finetune_epochs),
        HB_COUNT("train.batch_size", "mini-batch size", train.batch_size),
        HB_DOUBLE("train.lr", "initial SGD learning rate", train.sgd.learning_rate),
        HB_DOUBLE("train.momentum", "SGD momentum", train.sgd.momentum),
        HB_DOUBLE("train.weight_decay", "L2 weight decay", train.sgd.weight_decay),
        Field{{"train.lr_drop_epochs", "epochs at which the learning rate drops, comma separated"},
              [](RunConfig& c, std::string_view v) {
                  std::vector<int> out;
                  for (auto item : list_items(v)) out.push_back(static_cast<int>(to_int("train.lr_drop_epochs", item)));
                  c.train.sgd.lr_drop_epochs = std::move(out);
              },
              [](const RunConfig& c) {
                  return join(c.train.sgd.lr_drop_epochs, [](int e) { return std::to_string(e); });
              }},
        HB_DOUBLE("train.lr_drop_factor", "divisor applied at each drop epoch", train.sgd.lr_drop_factor),
        HB_DOUBLE("train.finetune_lr_scale", "learning-rate multiplier for rounds >= 2", train.finetune_lr_scale),
        HB_DOUBLE("train.alpha", "weight update exponent: d <- d * p^-alpha", train.alpha),
        HB_DOUBLE("train.lambda", "hardness normalization gain", train.lambda),
        HB_DOUBLE("train.ema_momentum", "momentum of the running weight statistics", train.ema_momentum),
        HB_DOUBLE("train.hardness_epsilon", "floor on the running standard deviation", train.hardness_epsilon),
        HB_INT("train.rounds", "boosting rounds K (1-4)", train.rounds),
        Field{{"train.variant", "Baseline, V1, V2 or V3"},
              [](RunConfig& c, std::string_view v) { c.train.variant = parse_variant(v); },
              [](const RunConfig& c) { return std::string(to_string(c.train.variant)); }},
        Field{{"train.betas", "ensemble weight per round, comma separated"},
              [](RunConfig& c, std::string_view v) {
                  std::vector<double> out;
                  for (auto item : list_items(v)) out.push_back(to_double("train.betas", item));
                  c.train.betas = std::move(out);
              },
              [](const RunConfig& c) { return join(c.train.betas, [](double b) { return shortest(b); }); }},
        Field{{"train.renormalize_weights", "rescale weights to sum to N after each update"},
              [](RunConfig& c, std::string_view v) {
                  c.train.renormalize_weights = to_bool("train.renormalize_weights", v);
              },
              [](const RunConfig& c) { return std::string(c.train.renormalize_weights ? "true" : "false"); }},
        HB_COUNT("train.seed", "training seed (--seed sets this and gen.seed)", train.seed),

        Field{{"margin.preset", "cosface, arcface, adaface or softmax; sets m_s, m_a, m_c"},
              [](RunConfig& c, std::string_view v) {
                  const double scale = c.train.margin.base_scale;
                  c.train.margin = MarginParams::preset(v, scale);
              },
              nullptr},
        HB_DOUBLE("margin.m_s", "multiplicative angular margin", train.margin.m_s),
        HB_DOUBLE("margin.m_a", "additive angular margin (radians)", train.margin.m_a),
        HB_DOUBLE("margin.m_c", "additive cosine margin", train.margin.m_c),
        HB_DOUBLE("margin.scale", "base logit scale s", train.margin.base_scale),

        HB_COUNT("model.hidden_width", "units per hidden tanh layer", train.hidden_width),
        HB_COUNT("model.hidden_layers", "hidden tanh layers", train.hidden_layers),
        HB_COUNT("model.embed_dim", "embedding dimension", train.embed_dim),
    };
    return table;
}

#undef HB_DOUBLE
#undef HB_COUNT
#undef HB_INT

const Field& find_field(std::string_view key) {
    for (const auto& f : fields())
        if (f.meta.key == key) return f;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& f : fields()) out.push_back(f.meta);
        return out;
    }();
    return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
    find_field(trim(key)).set(config, trim(value));
}

void apply_config_text(RunConfig& config, std::string_view text, std::string_view source) {
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (!seen.insert(std::string(key)).second) throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
        try {
            apply_setting(config, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig config;
    apply_config_text(config, read_text(path), path.string());
    validate(config);
    return config;
}

std::string setting_value(const RunConfig& config, std::string_view key) {
    const auto& f = find_field(key);
    if (!f.get) throw ConfigError(std::string(key) + ": write-only key");
    return f.get(config);
}

std::string config_snapshot(const RunConfig& config) {
    std::string out;
    for (const auto& f : fields()) {
        if (!f.get) continue;
        out += std::string(f.meta.key) + " = " + f.get(config) + "\n";
    }
    return out;
}

void validate(const RunConfig& config) {
    config.gen.validate();
    config.train.validate();
}

}  // namespace hardboost
