#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace hem {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// xoshiro256** engine. Streams are derived from a root seed and a key path,
/// so any (seed, keys...) pair names the same sequence regardless of which
/// thread draws from it.
class Engine {
public:
    using result_type = std::uint64_t;

    Engine() : Engine(0) {}

    explicit Engine(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    /// Stream for (seed, k1, k2, ...). Keys are folded in order.
    static Engine stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
        std::uint64_t h = seed;
        std::uint64_t mix = detail::splitmix64(h);
        for (std::uint64_t k : keys) {
            std::uint64_t t = mix ^ (k + 0x632be59bd9b4e019ULL);
            mix = detail::splitmix64(t);
        }
        return Engine(mix);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::array<std::uint64_t, 4> s_{};
};

// Stream tags used to keep independent consumers on disjoint key paths.
enum class StreamTag : std::uint64_t {
    simulate = 1,
    latent_sweep,
    update_b,
    update_eta,
    update_aux,
    init,
    prior,
    covariates,
    gir_forward,
    gir_backward,
    holdout,
    impute,
    ppc,
};

inline std::uint64_t tag(StreamTag t) noexcept { return static_cast<std::uint64_t>(t); }

}  // namespace hem
