#pragma once

#include <cstdint>
#include <random>

namespace pdnac {

using Rng = std::mt19937_64;

/// Identifies which part of a run consumes a random stream.
enum class StreamTag : std::uint64_t {
    init = 1,
    critic = 2,
    actor = 3,
    probe = 4,
    generator = 5,
    replica = 6,
    test = 7,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Coordinates of a stream inside one run: (master seed, epoch, subroutine, inner step).
///
/// Streams are derived by hashing the coordinates, so the draws made at
/// (k, tag, h) never depend on how many steps other subroutines took.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    StreamTag tag = StreamTag::init;
    std::uint64_t step = 0;

    [[nodiscard]] std::uint64_t hash() const {
        std::uint64_t h = detail::splitmix64(seed);
        h = detail::splitmix64(h ^ epoch);
        h = detail::splitmix64(h ^ static_cast<std::uint64_t>(tag));
        return detail::splitmix64(h ^ step);
    }
};

inline Rng make_stream(const StreamKey& key) { return Rng(key.hash()); }

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t step = 0) {
    return make_stream(StreamKey{seed, 0, tag, step});
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace pdnac
