#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace dissipacert {

/// Deterministic, platform-independent PRNG (xoshiro256++ seeded via splitmix64).
/// All randomness in the library flows through this type so that a master seed
/// reproduces every run bit-for-bit; child streams are derived with derive().
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
        have_spare_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return n ? next_u64() % n : 0; }

    /// Standard normal via Box-Muller (platform-stable, unlike std::normal_distribution).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform direction on the unit sphere in R^dim.
    std::vector<double> unit_vector(std::size_t dim) {
        std::vector<double> v(dim);
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (auto& x : v) {
                x = normal();
                n2 += x * x;
            }
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& x : v) x *= inv;
        return v;
    }

    /// Child seed for an independent stream, keyed by purpose + indices.
    /// The derivation is documented in the README; reports record the master
    /// seed only, everything else is reproducible from it.
    static std::uint64_t derive(std::uint64_t master, std::string_view purpose,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t h = master ^ 0x9e3779b97f4a7c15ULL;
        for (const char c : purpose) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
        h = splitmix64(h ^ a);
        h = splitmix64(h ^ (b + 0x517cc1b727220a95ULL));
        return h;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t splitmix64(std::uint64_t&& x) {
        std::uint64_t y = x;
        return splitmix64(y);
    }
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dissipacert
