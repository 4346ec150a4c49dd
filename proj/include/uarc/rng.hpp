#pragma once
// Counter-based deterministic RNG. SplitMix64 streams plus Box-Muller
// normals; identical output on every platform, cheap to fork into
// independent per-attempt/per-tick streams.

#include <cmath>
#include <cstdint>

namespace uarc {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // independent stream derived from (seed, index)
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ULL + index * 0xbf58476d1ce4e5b9ULL));
        r.next_u64();
        return r;
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    double normal() {
        // Box-Muller; u1 bounded away from zero
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace uarc
