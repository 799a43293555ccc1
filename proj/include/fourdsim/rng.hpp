#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace fourdsim::rng {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so results do not depend on how work is
// chunked across threads.

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Stream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    std::uint64_t bits(std::uint64_t counter, std::uint64_t salt = 0) const {
        std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
        h = mix64(h ^ stream);
        h = mix64(h ^ counter);
        if (salt != 0) h = mix64(h ^ salt);
        return h;
    }

    // uniform in (0, 1]
    double uniform(std::uint64_t counter, std::uint64_t salt = 0) const {
        return (static_cast<double>(bits(counter, salt) >> 11) + 1.0) * 0x1.0p-53;
    }

    // standard normal, one value per counter (Box-Muller, cosine branch)
    double gaussian(std::uint64_t counter) const {
        const double u1 = uniform(counter, 0x7f4a7c15ULL);
        const double u2 = uniform(counter, 0x85ebca6bULL);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // two independent standard normals from one counter
    std::complex<double> gaussian_pair(std::uint64_t counter) const {
        const double u1 = uniform(counter, 0x7f4a7c15ULL);
        const double u2 = uniform(counter, 0x85ebca6bULL);
        const double r = std::sqrt(-2.0 * std::log(u1));
        return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
    }

    // uniform integer in [0, bound)
    std::uint64_t integer(std::uint64_t counter, std::uint64_t bound) const {
        // 64-bit multiply-shift; bias is negligible for the bounds used here
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(bits(counter, 0xc2b2ae35ULL)) * bound) >> 64);
    }
};

}  // namespace fourdsim::rng
