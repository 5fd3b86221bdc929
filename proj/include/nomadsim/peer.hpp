#pragma once

#include "nomadsim/bytes.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/siphash.hpp"
#include "nomadsim/time.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace nomadsim {

using Keyring = std::map<KeyId, MacKey>;

enum class BeaconKind : std::uint8_t {
    Periodic = 0,          // regular discovery heartbeat
    ConnectivityChange = 1 // pushed when core access flips
};

// Discovery/notification frame. The MAC covers the canonical serialization of
// every preceding field, so any bit flip (or key mismatch) is detected.
struct Beacon {
    BeaconKind kind = BeaconKind::Periodic;
    NodeId sender = 0;
    SimTime sent_at;
    bool has_core_access = false;
    KeyId key_id = 0;
    std::uint64_t mac = 0;
};

// Canonical wire form: fixed field order, fixed widths, big-endian.
inline std::vector<std::uint8_t> beacon_signing_bytes(const Beacon& b) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(b.kind));
    w.u64(b.sender);
    w.i64(b.sent_at.us());
    w.u8(b.has_core_access ? 1 : 0);
    w.u64(b.key_id);
    return w.bytes();
}

inline Beacon make_beacon(BeaconKind kind, NodeId sender, SimTime now, bool core_access,
                          KeyId key_id, const Keyring& keys) {
    Beacon b{kind, sender, now, core_access, key_id, 0};
    b.mac = siphash24(keys.at(key_id), beacon_signing_bytes(b));
    return b;
}

enum class PeerAuth { Accepted, UnknownKey, BadMac };

inline const char* peer_auth_name(PeerAuth a) {
    switch (a) {
        case PeerAuth::Accepted: return "accepted";
        case PeerAuth::UnknownKey: return "unknown_key";
        case PeerAuth::BadMac: return "bad_mac";
    }
    return "?";
}

// Accepts iff the named key exists and the MAC verifies; nothing the sender
// claims is trusted before that.
inline PeerAuth authenticate_peer(const Beacon& b, const Keyring& keys) {
    auto it = keys.find(b.key_id);
    if (it == keys.end()) return PeerAuth::UnknownKey;
    if (siphash24(it->second, beacon_signing_bytes(b)) != b.mac) return PeerAuth::BadMac;
    return PeerAuth::Accepted;
}

struct PeerEntry {
    SimTime last_seen;
    bool has_core_access = false;
};

// Authenticated-neighbor table with beacon-refresh expiry.
class PeerTable {
public:
    const std::map<NodeId, PeerEntry>& entries() const { return entries_; }
    bool contains(NodeId n) const { return entries_.count(n) > 0; }

    void upsert(NodeId n, SimTime now, bool core_access) {
        entries_[n] = {now, core_access};
    }

    bool set_core_access(NodeId n, bool core_access) {
        auto it = entries_.find(n);
        if (it == entries_.end()) return false;
        it->second.has_core_access = core_access;
        return true;
    }

    // Evicts entries not refreshed within ttl; returns who left.
    std::vector<NodeId> expire(SimTime now, SimTime ttl) {
        std::vector<NodeId> gone;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (now - it->second.last_seen > ttl) {
                gone.push_back(it->first);
                it = entries_.erase(it);
            } else {
                ++it;
            }
        }
        return gone;
    }

private:
    std::map<NodeId, PeerEntry> entries_;
};

// Deterministic gateway election: the lowest node id among everyone known to
// have core access (self included). Every node running this over the same
// beacon snapshot picks the same gateway.
inline std::optional<NodeId> elect_gateway(const PeerTable& table, NodeId self,
                                           bool self_core_access) {
    std::optional<NodeId> best;
    if (self_core_access) best = self;
    for (const auto& [id, e] : table.entries()) {
        if (e.has_core_access && (!best || id < *best)) best = id;
    }
    return best;
}

} // namespace nomadsim
