#pragma once

#include "nomadsim/ids.hpp"
#include "nomadsim/link.hpp"
#include "nomadsim/time.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nomadsim {

enum class MsgCategory {
    ControlN2,     // forwarded control ops, journal upload, reconcile result
    PeerDiscovery, // beacons, connectivity notifications
    RouteControl,  // route request / reply
    UserData,      // relayed user packets + hop acks
    TransportProbe,
    Spectrum,      // policy server request / response / release
};

inline const char* msg_category_name(MsgCategory c) {
    switch (c) {
        case MsgCategory::ControlN2: return "control_n2";
        case MsgCategory::PeerDiscovery: return "peer_discovery";
        case MsgCategory::RouteControl: return "route_control";
        case MsgCategory::UserData: return "user_data";
        case MsgCategory::TransportProbe: return "transport_probe";
        case MsgCategory::Spectrum: return "spectrum";
    }
    return "?";
}

enum class BearerRole { Backhaul, Internode, Regulatory };

inline const char* bearer_role_name(BearerRole r) {
    switch (r) {
        case BearerRole::Backhaul: return "backhaul";
        case BearerRole::Internode: return "internode";
        case BearerRole::Regulatory: return "regulatory";
    }
    return "?";
}

// ---- trace records ---------------------------------------------------------

// One transmit() call. `dropped` is rewritten in place if an in-flight
// delivery is cancelled by a later link failure; the trace is serialized only
// after the run, so records always carry final outcomes.
struct TransmissionRecord {
    SimTime at;
    NodeId sender = 0;
    LinkUid link;
    BearerRole role = BearerRole::Backhaul;
    MsgCategory category = MsgCategory::UserData;
    std::uint64_t size_bytes = 0;
    bool dropped = false;
    DropReason drop_reason = DropReason::Loss;
    SimTime delivered_at;
};

// Radio energy on the air in some region: the unit the licensing checker
// audits. Emitted once per broadcast or unicast send over internode radio.
struct RadioTxRecord {
    SimTime at;
    NodeId node = 0;
    BandId band = 0;
    std::int64_t region = -1; // -1: outside all regions
    double power_dbm = 0.0;
    GrantId grant = 0; // 0 means no covering grant was held (a violation)
    MsgCategory category = MsgCategory::PeerDiscovery;
};

struct ModeTransitionRecord {
    SimTime at;
    NodeId node = 0;
    std::string from;
    std::string to;
};

// Archive of every control op ever created, for replay oracles.
struct ControlOpRecord {
    SimTime at;
    NodeId origin = 0;
    std::uint64_t seq = 0;
    std::uint64_t lamport = 0;
    std::string kind;
    std::string subject;
    std::map<std::string, std::string> params;
};

struct ControlResponseRecord {
    SimTime requested_at;
    SimTime responded_at;
    NodeId node = 0;
    std::uint64_t seq = 0;
    std::string kind;
    std::string subject;
    std::string served_mode; // connected | isolated | integrated
    bool accepted = false;
    std::string reject_reason;
};

struct ReconcileRecord {
    SimTime at;
    NodeId node = 0;
    std::uint64_t uploaded = 0;
    std::uint64_t applied = 0;
    std::uint64_t rejected = 0;
    SimTime duration;
};

// Inventory report from a self-governing node: the central core learns how
// many entries the node holds, never the entries themselves.
struct CensusRecord {
    SimTime at;
    NodeId node = 0;
    std::uint64_t sessions = 0;
};

struct AnchorMigrationRecord {
    SimTime at;
    NodeId node = 0;
    std::string session;
    std::string from;
    std::string to;
};

struct PacketOutcomeRecord {
    SimTime at;
    PacketId pkt = 0;
    std::string session;
    NodeId origin = 0;
    std::string outcome; // delivered | dropped
    std::string drop_reason;
    SimTime latency;
    std::vector<NodeId> hops;
};

struct BearerSwitchRecord {
    SimTime at;
    NodeId node = 0;
    std::string vif; // n2 | n3
    BearerId from = 0; // 0: none
    BearerId to = 0;
    bool to_link_up = false;
};

struct RouteEventRecord {
    SimTime at;
    NodeId node = 0;
    std::string kind; // established | invalidated | no_route
    std::uint64_t seq = 0;
    std::vector<NodeId> path;
};

struct SpectrumDecisionRecord {
    SimTime at;
    NodeId node = 0;
    RegionId region = 0;
    BandId band = 0;
    std::string decision; // grant | denial
    std::string reason;   // denial reason, empty on grant
    SimTime latency;
    GrantId grant = 0;
};

struct GrantEventRecord {
    SimTime at;
    std::string kind; // activated | released | expired
    GrantId grant = 0;
    AuthorityId authority;
    NodeId node = 0;
    BandId band = 0;
    RegionId region = 0;
    SimTime window_start;
    SimTime window_end;
    double power_cap_dbm = 0.0;
};

struct RegionChangeRecord {
    SimTime at;
    NodeId node = 0;
    std::int64_t from = -1;
    std::int64_t to = -1;
};

struct RadioStateRecord {
    SimTime at;
    NodeId node = 0;
    std::int64_t region = -1;
    std::string state; // granted | pending | silent
};

struct GatewayRecord {
    SimTime at;
    NodeId node = 0;
    std::int64_t gateway = -1; // -1: none
};

struct ViolationRecord {
    SimTime at;
    std::string kind;
    std::string detail;
};

using TraceRecord = std::variant<TransmissionRecord,
                                 RadioTxRecord,
                                 ModeTransitionRecord,
                                 ControlOpRecord,
                                 ControlResponseRecord,
                                 ReconcileRecord,
                                 CensusRecord,
                                 AnchorMigrationRecord,
                                 PacketOutcomeRecord,
                                 BearerSwitchRecord,
                                 RouteEventRecord,
                                 SpectrumDecisionRecord,
                                 GrantEventRecord,
                                 RegionChangeRecord,
                                 RadioStateRecord,
                                 GatewayRecord,
                                 ViolationRecord>;

// ---- run counters ----------------------------------------------------------

struct Counters {
    std::uint64_t events_processed = 0;

    std::uint64_t tx_attempts = 0;
    std::uint64_t tx_delivered = 0;
    std::map<std::string, std::uint64_t> tx_dropped; // by reason

    std::uint64_t packets_sent = 0;
    std::uint64_t packets_delivered = 0;
    std::uint64_t packets_duplicate_suppressed = 0;
    std::map<std::string, std::uint64_t> packets_dropped; // by reason
    std::uint64_t packets_buffered_at_end = 0;

    std::uint64_t control_requests = 0;
    std::map<std::string, std::uint64_t> control_served; // by mode
    std::uint64_t control_rejected = 0;

    std::uint64_t mode_transitions = 0;
    std::uint64_t reconciles = 0;
    std::uint64_t reconcile_applied = 0;
    std::uint64_t reconcile_rejected = 0;
    std::uint64_t census_reports = 0;

    std::uint64_t bearer_switches = 0;

    std::uint64_t beacons_sent = 0;
    std::uint64_t beacons_accepted = 0;
    std::map<std::string, std::uint64_t> beacons_rejected; // by reason
    std::uint64_t peers_expired = 0;

    std::uint64_t rreq_sent = 0;
    std::uint64_t rreq_forwarded = 0;
    std::uint64_t rrep_sent = 0;
    std::uint64_t routes_established = 0;
    std::uint64_t route_errors = 0;
    std::uint64_t route_discovery_failures = 0;

    std::uint64_t spectrum_requests = 0;
    std::uint64_t grants_issued = 0;
    std::map<std::string, std::uint64_t> denials; // by reason
    std::uint64_t grants_released = 0;
    std::uint64_t grants_expired = 0;

    std::uint64_t radio_transmissions = 0;
    std::uint64_t licensing_violations = 0;

    std::uint64_t warning_linkup_noop = 0;
    std::uint64_t warning_linkdown_noop = 0;

    friend bool operator==(const Counters&, const Counters&) = default;
};

// Append-only run trace. Indices returned by append() stay valid; the kernel
// uses them to finalize transmission outcomes.
class TraceLog {
public:
    std::size_t append(TraceRecord rec) {
        records_.push_back(std::move(rec));
        return records_.size() - 1;
    }

    TraceRecord& at(std::size_t idx) { return records_[idx]; }
    const std::vector<TraceRecord>& records() const { return records_; }

    template <typename T, typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& r : records_) {
            if (const T* p = std::get_if<T>(&r)) fn(*p);
        }
    }

private:
    std::vector<TraceRecord> records_;
};

} // namespace nomadsim
