#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <string>

namespace kcd {

/// splitmix64 step; used to derive independent child seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over a string; used to fold identifiers (volume ids) into seeds.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic random source: std::mt19937_64 (bit-exact across platforms by
/// the standard) with hand-rolled distributions, because the std::*_distribution
/// classes are implementation-defined. All randomness in the project flows
/// through this class so that seeded results are reproducible everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n), n >= 1. Lemire reduction (no rejection loop
    /// bias beyond 2^-64, deterministic everywhere __int128 exists).
    std::uint64_t uniform_int(std::uint64_t n) {
        using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((u128(engine_()) * u128(n)) >> 64);
    }

    /// Standard normal via Box-Muller (cached second value).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    std::mt19937_64& engine() { return engine_; }

    /// Exact state round trip (engine text per the standard; the cached
    /// Box-Muller value as raw bits so resume is bit-identical).
    std::string serialize() const {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(cached_));
        std::memcpy(&bits, &cached_, sizeof(bits));
        std::ostringstream ss;
        ss << engine_ << ' ' << (has_cached_ ? 1 : 0) << ' ' << bits;
        return ss.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream ss(s);
        int flag = 0;
        std::uint64_t bits = 0;
        ss >> engine_ >> flag >> bits;
        if (!ss) throw std::invalid_argument("Rng::deserialize: malformed state");
        has_cached_ = flag != 0;
        std::memcpy(&cached_, &bits, sizeof(cached_));
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace kcd
