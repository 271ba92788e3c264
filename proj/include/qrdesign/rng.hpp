#pragma once

#include <cstdint>
#include <random>

namespace qrdesign {

/**
 * Mix a 64-bit state into a well-scrambled value (splitmix64 finalizer).
 */
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Derive a child seed from a master seed and up to three stream indices.
 *
 * Used to give every independent unit of randomized work (an optimizer
 * start, a population member, a simulation replicate) its own RNG stream,
 * so results do not depend on scheduling or thread count.
 */
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(master ^ 0x51409ce8d1f5f1c1ULL);
    s = mix64(s ^ mix64(a));
    s = mix64(s ^ mix64(b + 0x2545f4914f6cdd1dULL));
    s = mix64(s ^ mix64(c + 0x9e6c63d0876a9a47ULL));
    return s;
}

/** Engine type used throughout the library. */
using Rng = std::mt19937_64;

/** Construct an engine for one derived stream. */
inline Rng make_rng(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(derive_seed(master, a, b, c));
}

} // namespace qrdesign
