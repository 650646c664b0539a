#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace distkern {

/// SplitMix64 step; used to expand seeds and to derive independent per-unit seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for work unit `stream` of a run seeded with `base`. Independent of scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    std::uint64_t s = base ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// xoshiro256** (Blackman & Vigna), state filled from the seed by four SplitMix64 steps.
///
/// Derived draws, all fixed so that results reproduce across platforms:
///  - uniform():   (next() >> 11) * 2^-53, in [0, 1)
///  - normal():    Box-Muller on u1 = 1 - uniform() in (0, 1], u2 = uniform();
///                 returns r*cos(2*pi*u2) and caches r*sin(2*pi*u2) for the next call
///  - below(n):    rejection sampling on the top bits, unbiased
///  - gamma(a):    Marsaglia-Tsang, with the a < 1 boost G(a+1) * U^(1/a)
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    double gamma(double shape) noexcept;
    double beta(double a, double b) noexcept;
    std::uint64_t below(std::uint64_t n) noexcept;

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace distkern
