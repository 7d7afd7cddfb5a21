#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace cate {

// Seed mixing for derived streams. Every replication seed is a pure function of
// (master seed, scenario label, n, replication index), so results are identical
// at any worker count.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x9E3779B97F4A7C15ull));
}

inline std::uint64_t hash_label(const std::string& s) {
    // FNV-1a
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// mt19937_64 has a standardized sequence; double conversions are done by hand
// so draws are bit-identical across platforms and library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)), have_spare_(false), spare_(0.0) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform on [0,1) with 53 random bits
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with cached spare; deterministic unlike std::normal_distribution
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // modulo with rejection to avoid bias
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_;
    double spare_;
};

}  // namespace cate
