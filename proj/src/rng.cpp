#include "reghal/rng.hpp"

namespace reghal {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
    std::uint64_t z = mix(base ^ 0x9E3779B97F4A7C15ull);
    z = mix(z ^ fnv1a(label));
    z = mix(z + 0x9E3779B97F4A7C15ull * (index + 1));
    return z;
}

}  // namespace reghal
