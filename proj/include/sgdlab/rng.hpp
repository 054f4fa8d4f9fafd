#pragma once

#include <cmath>
#include <cstdint>

namespace sgdlab {

// 64-bit mixing finalizer (splitmix64 step). Used both as a tiny PRNG for
// seeding and as the hash that derives independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) {
    return splitmix64(x);
}

// xoshiro256++ with a portable Box-Muller-free normal sampler (Marsaglia
// polar, cached second variate). Every stream is derived from a root seed
// plus up to two indices, so trial i of grid point g always sees the same
// sequence no matter how work is scheduled across threads.
class RngStream {
public:
    RngStream() : RngStream(0, 0, 0) {}

    explicit RngStream(std::uint64_t seed, std::uint64_t idx_a = 0, std::uint64_t idx_b = 0) {
        std::uint64_t s = seed;
        s = mix64(s ^ (0x9e3779b97f4a7c15ULL * (idx_a + 1)));
        s = mix64(s ^ (0xd1b54a32d192ed03ULL * (idx_b + 1)));
        for (auto& w : state_) w = splitmix64(s);
        have_cached_ = false;
        cached_ = 0.0;
    }

    std::uint64_t next_u64() {
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

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1] (safe as a log() argument)
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // uniform integer in [0, n), n > 0
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // standard normal, Marsaglia polar method
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * f;
        have_cached_ = true;
        return u * f;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    bool have_cached_;
    double cached_;
};

}  // namespace sgdlab
