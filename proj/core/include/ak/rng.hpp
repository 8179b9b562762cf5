#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

// Portable random helpers on top of std::mt19937_64. The std distributions are
// implementation-defined, so draws are derived from raw engine output here to keep
// results identical across standard libraries.
namespace ak::rng {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for (seed, stream, index).
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform01(e); }

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t below(Engine& e, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = e();
    } while (x >= limit);
    return x % n;
}

// Standard normal via Box-Muller (one value per call).
double normal(Engine& e);

template <class T>
void shuffle(std::span<T> items, Engine& e) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(below(e, i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace ak::rng
