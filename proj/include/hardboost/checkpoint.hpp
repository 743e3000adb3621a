#pragma once

#include <filesystem>
#include <optional>

#include "hardboost/io.hpp"
#include "hardboost/model.hpp"

namespace hardboost {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    EmbeddingModel model;
    std::optional<ModelGradient> momentum;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Layout (little-endian):
///   "HBCK" | u32 version | u64 input_dim | u64 embed_dim | u64 num_classes |
///   u64 num_layers | per layer: u64 rows, u64 cols, u8 activation |
///   f64 parameters (W_1, b_1, ..., centers) | u8 has_momentum |
///   f64 momentum buffers in the same order | u64 FNV-1a of all preceding bytes
Bytes encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hardboost
