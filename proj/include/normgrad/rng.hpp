#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace normgrad {

// Deterministic stream of uniforms/normals. The engine state is fully
// determined by (seed, tag), so independent consumers derive their own
// streams without coordinating. Normals use Box-Muller on 53-bit uniforms
// to stay reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(mix(seed)) {}
    Rng(std::uint64_t seed, std::string_view tag) : eng_(mix(seed ^ hash_tag(tag))) {}

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t integer() { return eng_(); }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer; avoids correlated mt19937 states for nearby seeds
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }
    static std::uint64_t hash_tag(std::string_view tag) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace normgrad
