#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace nomadsim {

// 128-bit pre-shared key for the keyed MAC.
struct MacKey {
    std::uint64_t k0 = 0;
    std::uint64_t k1 = 0;
    friend constexpr bool operator==(MacKey, MacKey) = default;
};

namespace detail {
inline constexpr std::uint64_t rotl64(std::uint64_t x, int b) {
    return (x << b) | (x >> (64 - b));
}
} // namespace detail

// SipHash-2-4, 64-bit tag. Standard short-output keyed MAC; stands in for the
// heavier trust machinery a production deployment would carry.
inline std::uint64_t siphash24(MacKey key, std::span<const std::uint8_t> data) {
    using detail::rotl64;
    std::uint64_t v0 = key.k0 ^ 0x736f6d6570736575ULL;
    std::uint64_t v1 = key.k1 ^ 0x646f72616e646f6dULL;
    std::uint64_t v2 = key.k0 ^ 0x6c7967656e657261ULL;
    std::uint64_t v3 = key.k1 ^ 0x7465646279746573ULL;

    auto round = [&] {
        v0 += v1; v1 = rotl64(v1, 13); v1 ^= v0; v0 = rotl64(v0, 32);
        v2 += v3; v3 = rotl64(v3, 16); v3 ^= v2;
        v0 += v3; v3 = rotl64(v3, 21); v3 ^= v0;
        v2 += v1; v1 = rotl64(v1, 17); v1 ^= v2; v2 = rotl64(v2, 32);
    };

    const std::size_t n = data.size();
    const std::size_t full = n - (n % 8);
    for (std::size_t i = 0; i < full; i += 8) {
        std::uint64_t m = 0;
        for (int j = 7; j >= 0; --j) m = (m << 8) | data[i + static_cast<std::size_t>(j)];
        v3 ^= m;
        round();
        round();
        v0 ^= m;
    }

    std::uint64_t m = static_cast<std::uint64_t>(n & 0xFF) << 56;
    for (std::size_t i = full; i < n; ++i) {
        m |= std::uint64_t{data[i]} << (8 * (i - full));
    }
    v3 ^= m;
    round();
    round();
    v0 ^= m;

    v2 ^= 0xFF;
    round();
    round();
    round();
    round();
    return v0 ^ v1 ^ v2 ^ v3;
}

} // namespace nomadsim
