#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pedcast {

/// Seeded generator with portable draw mappings (the distribution shaping is
/// done here rather than with std:: distributions, whose sequences are
/// implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p_true) { return uniform() < p_true; }

    /// Standard normal via Box-Muller (two draws per call, no caching, so the
    /// stream position stays easy to reason about).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// Child stream for an independent purpose; mixing keeps sibling streams
    /// decorrelated under sequential ids.
    Rng derive(std::uint64_t stream_id) {
        std::uint64_t x = engine_() ^ (stream_id * 0x9e3779b97f4a7c15ull);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return Rng(x);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace pedcast
