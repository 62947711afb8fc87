#pragma once

/* Seeded randomness. Every stochastic step draws from an Rng whose seed is
 * derived from the run seed plus a tuple of stream ids, so independent cells
 * of an experiment produce identical results in any evaluation order.
 * Uniform draws are produced here rather than through <random> distributions,
 * whose outputs differ between standard library implementations.
 */

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace mcmix {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20170901;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (auto s : stream) h = splitmix64(h ^ splitmix64(s + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    return Rng(derive_seed(seed, stream));
}

// Uniform on the open interval (0, 1).
inline double uniform01(Rng& rng) noexcept {
    return (double(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform integer in [0, n), n > 0. Lemire's multiply-and-reject.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(rng()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

} // namespace mcmix
