#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "ccdm/common.hpp"

namespace ccdm {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t fnv1a64_bytes(const void* data, size_t n, uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

// xoshiro256** with an explicit Box-Muller normal. Self-contained so that
// streams behave identically on every platform and every draw is countable.
class RngStream {
public:
    explicit RngStream(uint64_t seed = 0) {
        uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

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

    // Uniform on (0, 1].
    double uniform() {
        ++draws_;
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw ContractError("uniform_int: empty range");
        ++draws_;
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double normal() {
        ++draws_;
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Number of distribution draws consumed so far (probe for tests).
    uint64_t draw_count() const { return draws_; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4] = {};
    uint64_t draws_ = 0;
};

// Derives an independent named substream from a master seed. Purpose strings
// keep training, augmentation, validation and sampling draws on separate
// streams so that disabling one feature never perturbs another.
inline uint64_t derive_seed(uint64_t master_seed, std::string_view purpose, uint64_t a = 0,
                            uint64_t b = 0) {
    uint64_t mix = master_seed ^ fnv1a64(purpose);
    mix ^= 0x9e3779b97f4a7c15ULL * (a + 1);
    mix ^= (b + 1) * 0xbf58476d1ce4e5b9ULL;
    uint64_t sm = mix;
    return splitmix64(sm);
}

inline RngStream make_stream(uint64_t master_seed, std::string_view purpose, uint64_t a = 0,
                             uint64_t b = 0) {
    return RngStream(derive_seed(master_seed, purpose, a, b));
}

} // namespace ccdm
