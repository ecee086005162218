#pragma once
// Counter-based seed derivation. Every random stream is identified by
// (master seed, stream tag, index), so results do not depend on which thread
// ran which replicate.

#include <cstdint>
#include <random>

namespace mminfer {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return Rng(derive_seed(master, stream, index));
}

// Stream tags.
inline constexpr std::uint64_t kStreamSingleData = 0x5349'4E47'4C45ULL;
inline constexpr std::uint64_t kStreamClusterData = 0x434C'5553'5452ULL;
inline constexpr std::uint64_t kStreamBootstrap = 0x424F'4F54ULL;
inline constexpr std::uint64_t kStreamPanel = 0x5041'4E45'4CULL;

} // namespace mminfer
