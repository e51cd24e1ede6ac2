#pragma once

#include <cstdint>

namespace mtbrw {

/// Counter-based pseudo-random stream (SplitMix64 output function over a
/// per-stream key plus a running counter).
///
/// Draw i of stream (seed, stream) is a pure function of (seed, stream, i),
/// so trials can be assigned to threads or processes in any order and still
/// reproduce bit-identical results.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(derive_key(seed, stream)) {}

    std::uint64_t next_u64() noexcept { return mix(key_ + (++counter_) * kGamma); }

    /// Uniform draw in the open interval (0, 1).
    double next_uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t draws() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
        return mix(seed + kGamma) ^ mix(stream * 0xD1342543DE82EF95ull + 0x8CB92BA72F3D8DD7ull);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Stream-id namespaces keep draws made for different purposes (main trials,
/// auxiliary batches, series estimation) on disjoint streams of one seed.
namespace stream_ns {

inline constexpr std::uint64_t kTrials = 1;
inline constexpr std::uint64_t kAuxBatch = 2;
inline constexpr std::uint64_t kZeta = 3;
inline constexpr std::uint64_t kBootstrap = 4;

inline constexpr std::uint64_t id(std::uint64_t ns, std::uint64_t index) noexcept {
    return (ns << 48) | index;
}

}  // namespace stream_ns

}  // namespace mtbrw
