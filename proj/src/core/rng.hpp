#pragma once

#include <cstdint>
#include <cmath>
#include <utility>
#include <vector>

namespace plm {

// Deterministic, platform-independent PRNG used everywhere randomness is
// needed (splits, masking, init, dropout, sampling). The exact construction
// is part of the artifact's reproducibility contract:
//
//   state      xoshiro256** (Blackman/Vigna), four 64-bit words
//   seeding    the four words are the first four outputs of splitmix64(seed)
//   uniform()  53-bit mantissa: (next() >> 11) * 2^-53, in [0, 1)
//   below(n)   128-bit multiply-high of next() with n (Lemire reduction)
//   normal()   Box-Muller on two uniforms, the second draw is cached
//   derive     mix_seed(seed, stream) = sm64(sm64(seed + GOLDEN*(stream+1)))
//
// Same seed therefore yields the same stream on every platform.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed; used to give each consumer (step,
// sample, ...) its own generator without sharing state.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t s = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    uint64_t a = splitmix64(s);
    uint64_t b = a;
    return splitmix64(b);
}

class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
        has_spare_ = false;
        spare_ = 0.0;
    }

    static Rng derive(uint64_t seed, uint64_t stream) { return Rng(mix_seed(seed, stream)); }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform_f() { return static_cast<float>(uniform()); }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        const auto wide = static_cast<__uint128_t>(next_u64()) * static_cast<__uint128_t>(n);
        return static_cast<uint64_t>(wide >> 64);
    }

    // Standard normal via Box-Muller; one spare value cached between calls.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    float normal_f() { return static_cast<float>(normal()); }

    // Normal(0, std) resampled until |x| <= 2*std (BERT-style init).
    float truncated_normal_f(float stddev) {
        for (;;) {
            const double x = normal() * stddev;
            if (std::fabs(x) <= 2.0 * stddev) return static_cast<float>(x);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
    bool has_spare_;
    double spare_;
};

}  // namespace plm
