#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace fgrec {

// Deterministic xoshiro256** generator seeded through splitmix64.
// std::mt19937 plus the standard distributions are implementation-defined,
// which would break byte-reproducibility across toolchains, so all sampling
// is done by hand here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    // Independent child stream; used to give every image its own stream.
    Rng derive(std::uint64_t salt) const {
        std::uint64_t x = state_[0] ^ (salt * 0x9E3779B97F4A7C15ull);
        x ^= state_[2] + 0xD1B54A32D192ED03ull;
        return Rng(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection keeps the draw unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller without a cached spare so each draw consumes a fixed
    // number of generator words.
    double gaussian() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    // Beta(alpha, alpha) by Johnk's rejection method; alpha = 1 reduces to
    // a plain uniform draw.
    double beta_symmetric(double alpha) {
        if (alpha == 1.0) return uniform();
        for (int tries = 0; tries < 1000; ++tries) {
            const double x = std::pow(uniform(), 1.0 / alpha);
            const double y = std::pow(uniform(), 1.0 / alpha);
            if (x + y <= 1.0 && x + y > 0.0) return x / (x + y);
        }
        return 0.5;
    }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
};

} // namespace fgrec
