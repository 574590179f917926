#pragma once

#include <cstdint>
#include <cmath>
#include <limits>
#include <numbers>

namespace apmlmc {

inline std::uint64_t splitmix64_next(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ generator with counter-based stream derivation.
//
// Streams are keyed by (master seed, stream id, particle index); the key is
// folded through splitmix64, so any particle's stream depends only on those
// three integers and never on how work is split across threads.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64_next(s);
    }

    static Rng stream(std::uint64_t master_seed, std::uint64_t stream_id,
                      std::uint64_t particle_index) {
        std::uint64_t s = master_seed;
        std::uint64_t a = splitmix64_next(s);
        s ^= stream_id + 0x9e3779b97f4a7c15ULL;
        std::uint64_t b = splitmix64_next(s);
        s ^= particle_index + 0xbf58476d1ce4e5b9ULL;
        std::uint64_t c = splitmix64_next(s);
        return Rng(a ^ (b * 0x94d049bb133111ebULL) ^ c);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on [0,1), 53-bit resolution; never returns 1.0
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; consumes exactly two uniforms
    double normal() {
        const double u1 = 1.0 - uniform();  // (0,1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // +1 or -1 equiprobable
    double sign() { return (next() >> 63) ? 1.0 : -1.0; }

    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() {
        return std::numeric_limits<std::uint64_t>::max();
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace apmlmc
