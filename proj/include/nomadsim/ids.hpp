#pragma once

#include <cstdint>
#include <string>

namespace nomadsim {

using NodeId = std::uint32_t;
using RegionId = std::uint32_t;
using BandId = std::uint32_t;
using BearerId = std::uint32_t;
using KeyId = std::uint32_t;
using EventId = std::uint64_t;
using PacketId = std::uint64_t;
using TokenId = std::uint64_t;
using GrantId = std::uint64_t;
using AuthorityId = std::string;

// The core network is modelled as a distinguished vertex with the reserved id 0.
inline constexpr NodeId kCoreNode = 0;

// Stable identity for any physical link in a run. Explicitly declared bearers
// use their bearer id; range-derived internode links get a pair-based id.
struct LinkUid {
    std::uint64_t value = 0;

    static constexpr LinkUid bearer(BearerId b) { return LinkUid{b}; }
    static constexpr LinkUid internode(NodeId a, NodeId b) {
        const NodeId lo = a < b ? a : b;
        const NodeId hi = a < b ? b : a;
        return LinkUid{(std::uint64_t{1} << 48) | (std::uint64_t{lo} << 24) | hi};
    }
    static constexpr LinkUid regulatory(NodeId n) { return LinkUid{(std::uint64_t{2} << 48) | n}; }

    constexpr bool is_internode() const { return (value >> 48) == 1; }
    friend constexpr auto operator<=>(LinkUid, LinkUid) = default;
};

} // namespace nomadsim
