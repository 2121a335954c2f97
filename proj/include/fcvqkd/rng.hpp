#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fcvqkd {

/// SplitMix64 finalizer. Used both as the stream generator and as the
/// seed-derivation hash, so every random quantity in the project is a pure
/// function of (seed, stream id, position).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

/// Stream seed for sub-stream `index` of domain `tag` under `seed`.
/// Stable across releases: changing it changes every stored run.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) noexcept
{
    return mix64(mix64(seed ^ mix64(tag + golden_gamma)) + golden_gamma * (index + 1));
}

// Stream tags.
inline constexpr std::uint64_t tag_transmittance = 0x54;  // 'T'
inline constexpr std::uint64_t tag_package = 0x50;        // 'P'
inline constexpr std::uint64_t tag_sample = 0x53;         // 'S'

/// Counter-based SplitMix64 stream with portable uniform/normal draws.
/// The standard <random> distributions are implementation-defined, so the
/// transforms are spelled out here to keep runs bit-identical across
/// standard libraries.
class Stream {
public:
    explicit constexpr Stream(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept
    {
        state_ += golden_gamma;
        return mix64(state_);
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_pos() noexcept { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal (Box-Muller; the second variate is cached).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fcvqkd
