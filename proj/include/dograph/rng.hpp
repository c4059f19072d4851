#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "dograph/matrix.hpp"

namespace dograph {

namespace detail {

// SplitMix64 finalizer. Stateless mix of a 64-bit word; the basis of the
// counter RNG and of child-seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Counter-based deterministic RNG. The full state is (seed, counter); draw i
// of a given seed is splitmix64(seed ^ mix(i)), so streams replay exactly and
// are cheap to fork. The raw u64 stream is bit-identical on every platform;
// double-valued draws additionally go through libm (exp/log/cos), which is
// bit-stable across runs on one platform.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        return detail::splitmix64(seed_ + 0x632BE59BD9B4E019ULL * ++counter_);
    }

    // Uniform double in [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("next_below: n must be positive");
        const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= bound);
        return x % n;
    }

    // Standard normal via Box-Muller. Two uniforms per draw, no cached spare,
    // so the state stays (seed, counter).
    double next_gaussian() {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Independent derived stream. Children of distinct ids (and of distinct
    // parents) do not collide in practice; used to hand sub-tasks their own
    // replayable randomness.
    SeededRng child(std::uint64_t stream_id) const {
        return SeededRng(detail::splitmix64(seed_ ^ detail::splitmix64(stream_id ^ 0xA24BAED4963EE407ULL)));
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

// Matrix with i.i.d. N(0, variance) entries drawn from the given stream.
inline Matrix gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols,
                              double variance) {
    if (rows == 0 || cols == 0)
        throw std::invalid_argument("gaussian_matrix: zero rows or cols");
    if (!(variance > 0.0))
        throw std::invalid_argument("gaussian_matrix: variance must be positive");
    const double sd = std::sqrt(variance);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = sd * rng.next_gaussian();
    return m;
}

}  // namespace dograph
