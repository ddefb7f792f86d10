#pragma once

#include <cstdint>
#include <string_view>

#include "reghal/types.hpp"

namespace reghal {

/// SplitMix64 stream. All simulation randomness flows through this generator
/// via inverse-CDF sampling so draws are reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0,1); never returns an exact endpoint.
    double uniform01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double normal() { return normal_quantile(uniform01()); }

    int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

    /// Beta(2,2) via inverse CDF: solves 3t^2 - 2t^3 = u on [0,1].
    double beta22() {
        const double u = uniform01();
        double lo = 0.0, hi = 1.0, t = 0.5;
        for (int it = 0; it < 200; ++it) {
            const double f = t * t * (3.0 - 2.0 * t) - u;
            if (f > 0.0) hi = t; else lo = t;
            const double fp = 6.0 * t * (1.0 - t);
            double step = fp > 1e-12 ? t - f / fp : 0.5 * (lo + hi);
            t = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
            if (hi - lo < 1e-15) break;
        }
        return t;
    }

private:
    std::uint64_t state_;
};

/// Splittable seed derivation: mixes a base seed with a component label and a
/// counter so that replication r / component c always sees the same stream,
/// independent of scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index);

}  // namespace reghal
