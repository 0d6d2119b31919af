#ifndef FEDLAD_COMMON_HPP
#define FEDLAD_COMMON_HPP

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedlad {

// Flat vector of 64-bit model parameters; the unit of FL communication.
using ParamVector = std::vector<double>;

// User/config mistakes (bad config key, unreadable input). CLI maps these to exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mixes two 64-bit values into one seed (splitmix64 finalizer over a boost-style combine).
inline std::uint64_t hash64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Seed tags for deriving independent per-component streams from the experiment seed.
// Client streams use hash64(seed, client_id) directly; tags are far above any client id.
inline constexpr std::uint64_t kSeedModelInit = 0xF1ED0001ULL;
inline constexpr std::uint64_t kSeedValSplit = 0xF1ED0002ULL;
inline constexpr std::uint64_t kSeedPartition = 0xF1ED0003ULL;
inline constexpr std::uint64_t kSeedSampler = 0xF1ED0004ULL;

using Rng = std::mt19937_64;

// Fixed-precision, locale-independent float formatting ("0.693147").
inline std::string format_fixed(double v, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

// Shortest representation that parses back to the same double ("0.1", not "0.1000...").
inline std::string format_shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// FNV-1a 64-bit digest, hex-encoded; used for config and file digests.
inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    static const char* hexd = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hexd[h & 0xF];
        h >>= 4;
    }
    return std::string(buf, 16);
}

}  // namespace fedlad

#endif  // FEDLAD_COMMON_HPP
