#include "hardboost/checkpoint.hpp"

#include "hardboost/errors.hpp"

namespace hardboost {

namespace {

constexpr std::string_view kMagic = "HBCK";

void write_blocks(ByteWriter& w, const EmbeddingModel& m) {
    for (auto block : parameter_blocks(m)) w.f64s(block);
}

void read_blocks(ByteReader& r, EmbeddingModel& m) {
    for (auto block : parameter_blocks(m)) r.f64s(block);
}

}  // namespace

Bytes encode_checkpoint(const Checkpoint& ckpt) {
    const auto& m = ckpt.model;
    validate_shapes(m);
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kCheckpointVersion);
    w.u64(m.input_dim());
    w.u64(m.embed_dim());
    w.u64(m.num_classes());
    w.u64(m.layers.size());
    for (const auto& layer : m.layers) {
        w.u64(layer.weight.rows());
        w.u64(layer.weight.cols());
        w.u8(static_cast<std::uint8_t>(layer.activation));
    }
    write_blocks(w, m);
    w.u8(ckpt.momentum ? 1 : 0);
    if (ckpt.momentum) {
        if (parameter_blocks(*ckpt.momentum).size() != parameter_blocks(m).size())
            throw DimensionError("momentum buffers do not match model structure");
        write_blocks(w, *ckpt.momentum);
    }
    w.u64(fnv1a64(w.buffer()));
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kMagic, "checkpoint");
    const std::size_t version_at = r.offset();
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw UnsupportedVersionError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                          std::to_string(kCheckpointVersion) + ")",
                                      version_at);
    if (bytes.size() < 8) throw FormatError("checkpoint too short", 0);
    {
        ByteReader tail(bytes.subspan(bytes.size() - 8));
        const auto stored = tail.u64();
        if (stored != fnv1a64(bytes.first(bytes.size() - 8)))
            throw CorruptionError("checkpoint checksum mismatch");
    }

    const auto input_dim = r.u64();
    const auto embed_dim = r.u64();
    const auto num_classes = r.u64();
    const auto num_layers = r.u64();
    if (num_layers == 0 || num_layers > 64) throw FormatError("implausible layer count", r.offset() - 8);

    Checkpoint ckpt;
    auto& m = ckpt.model;
    for (std::uint64_t l = 0; l < num_layers; ++l) {
        const auto rows = r.u64();
        const auto cols = r.u64();
        const auto act = r.u8();
        if (act > 1) throw FormatError("unknown activation tag", r.offset() - 1);
        if (rows * cols > bytes.size()) throw FormatError("layer shape exceeds file size", r.offset() - 17);
        m.layers.push_back({Matrix(rows, cols), Vector(rows, 0.0), static_cast<Activation>(act)});
    }
    if (num_classes * embed_dim > bytes.size()) throw FormatError("center shape exceeds file size", r.offset());
    m.centers = Matrix(num_classes, embed_dim);
    validate_shapes(m);
    if (m.input_dim() != input_dim) throw FormatError("input_dim does not match first layer", r.offset());

    read_blocks(r, m);
    const auto has_momentum = r.u8();
    if (has_momentum > 1) throw FormatError("bad momentum flag", r.offset() - 1);
    if (has_momentum) {
        ckpt.momentum = zeros_like(m);
        read_blocks(r, *ckpt.momentum);
    }
    r.u64();  // checksum, verified above
    r.expect_end("checkpoint");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace hardboost
