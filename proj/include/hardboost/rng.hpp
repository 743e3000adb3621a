#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace hardboost {

/// Stafford "mix13" finalizer (the SplitMix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: the n-th output is mix64(key + n * golden gamma),
/// so any output is addressable without replaying the stream. `split` derives
/// an independent child key from a tag, which keeps every consumer of
/// randomness (init, shuffling, generation) on its own stream.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return at(counter_++); }
    result_type at(std::uint64_t n) const noexcept { return mix64(key_ + (n + 1) * 0x9e3779b97f4a7c15ULL); }

    CounterRng split(std::uint64_t tag) const noexcept { return CounterRng(key_ ^ mix64(tag + 0x3c6ef372fe94f82bULL)); }
    CounterRng split(std::string_view tag) const noexcept { return split(hash_tag(tag)); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace hardboost
