#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nsslab {

// All randomness in the library flows through mt19937_64 engines seeded from a
// master seed plus a short label, so that e.g. environment draws and learner
// draws come from independent streams and changing one cannot shift the other.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t state = master ^ 0xa0761d6478bd642fULL;
    (void)splitmix64(state);
    for (char ch : label) {
        state ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
        (void)splitmix64(state);
    }
    return splitmix64(state);
}

inline Rng make_stream(std::uint64_t master, std::string_view label) {
    return Rng(derive_seed(master, label));
}

}  // namespace nsslab
