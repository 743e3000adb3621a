#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "hardboost/io.hpp"
#include "hardboost/matrix.hpp"

namespace hardboost {

/// Parameters of the hardness-imbalanced generator. Each class has a random
/// unit prototype inside the identity subspace (the first identity_dim
/// coordinates); a sample is normalize(prototype + noise * g) with the noise
/// level set by the sample's tier. g is Gaussian with standard deviation
/// identity_noise inside the identity subspace and 1 in the remaining
/// nuisance coordinates, which carry no class information. identity_dim ==
/// input_dim with identity_noise == 1 gives plain isotropic noise.
struct GenConfig {
    std::size_t num_classes = 62;  // train + held-out
    std::size_t samples_per_class = 120;
    std::size_t input_dim = 32;
    double easy_fraction = 0.85;
    double easy_noise = 0.15;
    double hard_noise = 0.8;
    std::size_t identity_dim = 16;
    double identity_noise = 0.4;
    std::uint64_t seed = 1;

    /// Throws ConfigError naming the field.
    void validate() const;
    std::size_t num_eval_classes() const { return num_classes / 5; }
    std::size_t num_train_classes() const { return num_classes - num_eval_classes(); }

    friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

enum class Tier : std::uint8_t { Easy = 0, Hard = 1 };
enum class TierPair : std::uint8_t { EasyEasy = 0, Mixed = 1, HardHard = 2 };

std::string_view to_string(Tier tier);
std::string_view to_string(TierPair tag);

struct LabeledSample {
    std::size_t sample_id = 0;
    Vector input;
    std::size_t class_id = 0;
    Tier tier = Tier::Easy;  // generation metadata; evaluation only

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct VerificationPair {
    std::size_t a = 0;  // index into EvalSplit::samples
    std::size_t b = 0;
    bool same_class = false;
    TierPair tag = TierPair::EasyEasy;

    friend bool operator==(const VerificationPair&, const VerificationPair&) = default;
};

/// Held-out classes, disjoint from training classes.
struct EvalSplit {
    std::vector<LabeledSample> samples;
    std::vector<VerificationPair> pairs;
    std::vector<std::size_t> gallery;  // one easy sample per held-out class
    std::vector<std::size_t> probes;   // every other held-out sample

    friend bool operator==(const EvalSplit&, const EvalSplit&) = default;
};

struct Dataset {
    GenConfig config;
    Matrix prototypes;  // num_classes x input_dim
    std::vector<LabeledSample> train;  // sample_id == position; class ids in [0, num_train_classes)
    EvalSplit eval;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// The tier-free projection of the training set that the training path consumes.
struct TrainingSet {
    Matrix inputs;                    // one row per sample id
    std::vector<std::size_t> labels;  // class per sample id
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
};

inline constexpr std::size_t kMaxPositivePairs = 2000;

Dataset generate(const GenConfig& config);

TrainingSet training_view(const Dataset& dataset);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// "HBDS" | u32 version | config | prototypes | samples | pairs | gallery |
/// probes | u64 FNV-1a checksum. Little-endian throughout.
Bytes encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

/// `sample_id,class_id,tier,v0..v{dim-1}` for train and held-out samples.
void export_dataset_csv(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace hardboost
