#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace videotree {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Splittable seeding: sub-seeds are a pure function of (seed, tag), so
// clustering one tree node never perturbs the RNG stream of another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ h);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t n) {
    return splitmix64(seed ^ splitmix64(n));
}

// std::uniform_*_distribution sequences are implementation-defined; these
// draws are pinned so seeded runs replay byte-identically everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double next_double() {  // [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::size_t next_index(std::size_t n) {  // [0, n)
        return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n);
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace videotree
