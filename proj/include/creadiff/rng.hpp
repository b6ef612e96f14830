#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace creadiff {

// Deterministic random stream. Normal draws use Box-Muller on top of the
// mt19937_64 stream so the byte-for-byte sequence does not depend on the
// standard library's distribution internals. Each consumer owns its stream;
// derive sub-streams with child() instead of sharing one generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);  // 2^53
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection sampling to stay unbiased.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / span * span;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return lo + static_cast<std::int64_t>(v % span);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Independent child stream; index makes fan-out reproducible.
    Rng child(std::uint64_t index) const {
        return Rng(mix(mix(state_seed_hash(), 0x9e3779b97f4a7c15ull), index + 1));
    }

    static std::uint64_t hash_string(const std::string& s) {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

private:
    std::uint64_t state_seed_hash() const {
        // Engines are copyable; hashing a copy's first output gives a stable
        // per-stream identity without disturbing this stream.
        std::mt19937_64 copy = engine_;
        return copy();
    }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace creadiff
