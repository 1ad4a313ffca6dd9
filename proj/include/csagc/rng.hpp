#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace csagc {

// FNV-1a, used to derive per-stage RNG streams from a master seed.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic stream split: same (master, name) always yields the same seed,
// distinct names yield independent streams.
inline std::uint64_t split_seed(std::uint64_t master, std::string_view stream_name) {
    return splitmix64(master ^ fnv1a(stream_name));
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view stream_name) {
    return std::mt19937_64(split_seed(master, stream_name));
}

}  // namespace csagc
