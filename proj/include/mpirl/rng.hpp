#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace mpirl {

/// xoshiro256** seeded through splitmix64. Self-contained so that seeded
/// experiments are bit-identical across standard libraries and platforms.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
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

    /// Uniform draw in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    /// Standard normal via Box-Muller; draws two uniforms per call.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Sample an index from an unnormalized nonnegative weight vector.
    int categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (size_t i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u <= 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> state_{};
};

/// Halton sequence point (index starts at 1) in [0,1)^dim; used for
/// quasi-random restarts of the acquisition maximizer.
inline std::vector<double> halton_point(uint64_t index, int dim) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    std::vector<double> point(dim);
    for (int d = 0; d < dim; ++d) {
        const int base = primes[d % 10];
        double f = 1.0, value = 0.0;
        uint64_t i = index;
        while (i > 0) {
            f /= base;
            value += f * static_cast<double>(i % base);
            i /= base;
        }
        point[d] = value;
    }
    return point;
}

}  // namespace mpirl
