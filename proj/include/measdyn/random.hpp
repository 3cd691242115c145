#pragma once

#include <cstdint>
#include <random>

#include "measdyn/measure.hpp"

namespace measdyn {

// std::mt19937_64 is fully specified by the standard; the distributions are
// not, so uniform draws are built from raw bits to stay reproducible across
// standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for case `index` of a suite run with `seed`.
inline std::uint64_t case_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [lo, hi].
inline long uniform_int(Rng& rng, long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(rng() % span);
}

struct RandomMeasureSpec {
    std::size_t dim = 1;
    std::size_t min_atoms = 1;
    std::size_t max_atoms = 20;
    Point lower{0.0};
    Point upper{1.0};
    double weight_lo = -1.0;
    double weight_hi = 1.0;
};

inline AtomicMeasure random_measure(Rng& rng, const RandomMeasureSpec& spec) {
    const auto n = static_cast<std::size_t>(
        uniform_int(rng, static_cast<long>(spec.min_atoms), static_cast<long>(spec.max_atoms)));
    std::vector<double> coords;
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < spec.dim; ++k) coords.push_back(uniform(rng, spec.lower[k], spec.upper[k]));
        double w = uniform(rng, spec.weight_lo, spec.weight_hi);
        if (w == 0.0) w = spec.weight_hi;
        weights.push_back(w);
    }
    return AtomicMeasure(spec.dim, std::move(coords), std::move(weights));
}

}  // namespace measdyn
