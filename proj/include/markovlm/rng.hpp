#ifndef MARKOVLM_RNG_HPP
#define MARKOVLM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace markovlm {

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

// Seed of the independent stream number `index` under `master`.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
    SplitMix64 a(master);
    const std::uint64_t base = a.next();
    SplitMix64 b(base ^ (index * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
    b.next();
    return b.next();
}

// xoshiro256** with SplitMix64 seeding.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    Rng(std::uint64_t master, std::uint64_t stream) : Rng(derive_stream_seed(master, stream)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~std::uint64_t{0}; }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1).
    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Standard normal, Box-Muller; one draw per call, no cached pair.
    double normal() noexcept {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

}  // namespace markovlm

#endif  // MARKOVLM_RNG_HPP
