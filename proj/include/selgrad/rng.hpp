#pragma once

#include <cstdint>

#include "selgrad/types.hpp"

namespace selgrad {

// Counter-based deterministic RNG (splitmix64 addressed by counter).
// Output at counter k depends only on (key, k), so independent streams are
// cheap: derive a fresh key per run/worker and never share state.
class CounterRng {
  public:
    explicit CounterRng(uint64_t key) : key_(key) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Stable stream-splitting: key for sub-stream `id` of stream `key`.
    static uint64_t derive_key(uint64_t key, uint64_t id) { return mix(key ^ mix(id + 0x632BE59BD9B4E019ULL)); }

    uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in {0, ..., n-1} (n small; modulo bias negligible for our use).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    bool coin() { return (next_u64() & 1u) != 0; }

    // Standard normal via Box-Muller (consumes two uniforms per pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    Vec normal_vec(int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Vec uniform_vec(int n, double lo, double hi) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
        return v;
    }

    // Uniform in the euclidean ball of given radius around the origin.
    Vec in_ball(int n, double radius) {
        Vec dir = normal_vec(n);
        double nn = norm2(dir);
        while (nn == 0.0) {
            dir = normal_vec(n);
            nn = norm2(dir);
        }
        const double r = radius * std::pow(uniform(), 1.0 / n);
        return vscale(dir, r / nn);
    }

    uint64_t counter() const { return counter_; }

  private:
    uint64_t key_;
    uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace selgrad
