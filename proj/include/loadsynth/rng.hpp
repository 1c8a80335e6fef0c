#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace loadsynth {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Named sub-streams of a master seed:
//   derive_seed(parent, name)  = splitmix64(parent ^ fnv1a64(name))
//   derive_seed(parent, index) = splitmix64(parent ^ splitmix64(index + 1))
// Streams with different names never share state, so e.g. changing the
// sampling seed cannot perturb training.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

void fill_normal(Rng& rng, std::span<double> out);

}  // namespace loadsynth
