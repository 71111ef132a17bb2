#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gal {

/// One step of the SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31U);
}

/// Folds a sequence of integers into a seed. Order matters; the result does
/// not depend on anything but the values.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x6A09E667F3BCC909ULL;
    for (auto p : parts) {
        h = splitmix64(h ^ splitmix64(p));
    }
    return h;
}

/// Per-sample seed for the j-th image of a generate call made with `base`.
constexpr std::uint64_t sample_seed(std::uint64_t base, std::uint32_t j) noexcept {
    return derive_seed({base, j});
}

// Salts keep the different random streams of a run apart.
inline constexpr std::uint64_t kSaltGenerate = 0x67656eULL;
inline constexpr std::uint64_t kSaltSelect = 0x73656cULL;
inline constexpr std::uint64_t kSaltWorld = 0x776f72ULL;

/// mt19937_64 with distributions written out by hand. The standard library
/// distributions are implementation-defined, and golden files must match
/// across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11U) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), rejection sampled.
    std::uint64_t index(std::uint64_t n);

    /// Standard normal via Box-Muller; the second variate is cached.
    double gaussian();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gal
