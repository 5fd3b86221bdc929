#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace nomadsim {

// Canonical serialization buffer: fixed field order, fixed-width integers,
// big-endian. Both MAC computation (beacons, tokens) and state digests go
// through this so verification is portable across implementations.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { be(v); }
    void u32(std::uint32_t v) { be(v); }
    void u64(std::uint64_t v) { be(v); }
    void i64(std::int64_t v) { be(static_cast<std::uint64_t>(v)); }
    void f64(double v) { be(std::bit_cast<std::uint64_t>(v)); }

    // Length-prefixed string.
    void str(std::string_view s) {
        u16(static_cast<std::uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
    template <typename T>
    void be(T v) {
        for (int shift = static_cast<int>(sizeof(T)) * 8 - 8; shift >= 0; shift -= 8) {
            buf_.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
        }
    }

    std::vector<std::uint8_t> buf_;
};

inline std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace nomadsim
