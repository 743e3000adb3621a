#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hardboost/synth.hpp"
#include "hardboost/trainer.hpp"

namespace hardboost {

/// Everything a run needs: generator settings and training settings.
struct RunConfig {
    GenConfig gen;
    TrainConfig train;

    /// Seeds both the generator and the trainer.
    void set_seed(std::uint64_t seed) {
        gen.seed = seed;
        train.seed = seed;
    }
};

struct ConfigKey {
    std::string_view key;
    std::string_view help;
};

/// Every recognized key, in snapshot order.
const std::vector<ConfigKey>& config_keys();

/// Sets one dotted key (`train.alpha`, `margin.preset`, ...). Unknown keys and
/// unparsable values throw ConfigError naming the key.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Applies `key = value` lines in order on top of `config`. Blank lines and
/// lines starting with '#' are skipped; a key may appear once per document.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view source = "<config>");

/// Defaults overlaid with the file's settings, then validated.
RunConfig load_config(const std::filesystem::path& path);

/// Current value of a key in the form apply_setting accepts.
std::string setting_value(const RunConfig& config, std::string_view key);

/// Full `key = value` listing of every key; parses back to an identical config.
std::string config_snapshot(const RunConfig& config);

/// Throws ConfigError naming the first invalid field.
void validate(const RunConfig& config);

}  // namespace hardboost
