#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace flowmi {

// splitmix64; the fixed mixing function used everywhere seeds are derived.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derived stream seed: mix(master XOR salt). Used for sub-seeding training
// streams, bootstrap permutations and benchmark runs, so results never depend
// on execution schedule.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t salt) {
    return splitmix64(master ^ salt);
}

// Deterministic random source. The engine (mt19937_64) has a fully specified
// output sequence and all distribution transforms below are written out
// explicitly, so streams are reproducible across platforms and library
// versions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform on [0, 1) with 53 random bits
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, cosine branch only
    double normal() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Laplace(0, scale) as a signed exponential
    double laplace(double scale) {
        const double mag = -scale * std::log(1.0 - uniform01());
        return (next_u64() & 1u) ? mag : -mag;
    }

    // uniform integer in [0, n), rejection sampled (unbiased)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Fisher-Yates
    template <class T> void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<int> permutation(int n) {
        std::vector<int> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
        shuffle(p);
        return p;
    }

  private:
    std::mt19937_64 eng_;
};

} // namespace flowmi
