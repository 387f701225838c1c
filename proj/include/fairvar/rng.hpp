#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace fairvar {

// Stream labels mixed into a seed so that independent consumers of the same
// seed (e.g. the epoch number) never alias.
inline constexpr std::uint64_t kWeightStream = 0;
inline constexpr std::uint64_t kShuffleStream = 1;
inline constexpr std::uint64_t kDropoutStream = 2;
inline constexpr std::uint64_t kSplitStream = 3;
inline constexpr std::uint64_t kSynthStream = 4;

/// SplitMix64 generator. The whole state is one 64-bit word, so a Prng is a
/// plain value: copy it to fork a replay, never share it between threads.
class Prng {
public:
    constexpr explicit Prng(std::uint64_t state) noexcept : state_(state) {}

    /// Generator for `seed` on a given stream. Stream 0 leaves the seed
    /// untouched, so `from(s, 0)` reproduces the reference SplitMix64 sequence.
    static constexpr Prng from(std::uint64_t seed, std::uint64_t stream) noexcept
    {
        return Prng(seed ^ mix(stream * 0x9E3779B97F4A7C15ULL));
    }

    constexpr std::uint64_t next() noexcept
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Top 53 bits scaled by 2^-53; always in [0, 1).
    constexpr double uniform() noexcept
    {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Standard normal variate, polar Box-Muller. The second variate of each
    /// accepted pair is discarded so the state stays a single word.
    double gaussian() noexcept;

    /// Uniform integer in [0, bound) by 64-bit multiply-high reduction.
    constexpr std::uint64_t bounded(std::uint64_t bound) noexcept
    {
        const auto wide = static_cast<unsigned __int128>(next()) * bound;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    constexpr std::uint64_t state() const noexcept { return state_; }

    friend constexpr bool operator==(const Prng&, const Prng&) = default;

private:
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

/// In-place Fisher-Yates, i from n-1 down to 1, j uniform in [0, i].
void shuffle(std::span<std::size_t> items, Prng& rng) noexcept;

}  // namespace fairvar
