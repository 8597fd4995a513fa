#pragma once

#include <cstdint>
#include <random>

namespace iit {

using Rng = std::mt19937_64;

// Seed for replicate `index` of an experiment with master seed `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform draw on [0, 1).
inline double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

}  // namespace iit
