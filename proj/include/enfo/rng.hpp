#pragma once

#include <cstdint>
#include <random>

namespace enfo {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-style seed for stream `counter` under base `seed`. Every random
/// consumer (epoch shuffles, folds, generators) gets its own stream so that
/// results never depend on call order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL + 1));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t counter = 0) {
    return Rng(derive_seed(seed, counter));
}

}  // namespace enfo
