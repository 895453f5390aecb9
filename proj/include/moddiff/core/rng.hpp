#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace moddiff {

// All randomness flows from one user seed through named substreams, so that
// toggling a feature never perturbs the draws of an unrelated component.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t z = seed ^ h;
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::string_view substream) {
    return std::mt19937_64(substream_seed(seed, substream));
}

// Portable draws (std:: distributions are implementation-defined).
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

// Uniform integer in [0, n) by rejection-free 128-bit multiply-shift.
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(eng()) * n) >> 64);
}

template <typename T>
void shuffle_inplace(std::mt19937_64& eng, std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace moddiff
