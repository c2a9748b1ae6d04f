#pragma once

#include <cstdint>
#include <random>

namespace mourrelab {

// Uniform variate in [0, 1) from the top 53 bits of one engine output.
double uniform01(std::mt19937_64& gen);

// Engine keyed by (seed, key) through std::seed_seq. Streams for different keys
// are independent of the order in which they are requested.
std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t key);

}  // namespace mourrelab
