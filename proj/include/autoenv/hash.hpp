#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace autoenv {

/// FNV-1a, 64 bit. Stable across runs and platforms with IEEE doubles.
class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void add(std::string_view s) { bytes(s.data(), s.size()); }
    void add(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
        bytes(&bits, sizeof bits);
    }
    void add(std::uint64_t v) { bytes(&v, sizeof v); }
    void add(std::span<const double> vs) {
        for (double v : vs) add(v);
    }
    [[nodiscard]] std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// splitmix64 finalizer, used to derive independent seeds.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace autoenv
