#pragma once

#include "nomadsim/bytes.hpp"
#include "nomadsim/control_plane.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/siphash.hpp"
#include "nomadsim/spectrum.hpp"
#include "nomadsim/trace.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace nomadsim {

// ---- final-state digests -----------------------------------------------------

// Fixed key: digests identify state, they don't authenticate anything.
inline constexpr MacKey kDigestKey{0x5b3c0d9f2e81a647ULL, 0x9d26f4c1708ab3e5ULL};

// Order-insensitive by construction: AmfState containers are ordered maps/sets.
inline std::uint64_t digest_amf_state(const AmfState& st) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(st.registrations.size()));
    for (const auto& [ue, reg] : st.registrations) {
        w.str(ue);
        w.u64(reg.version);
        w.str(reg.serving);
    }
    w.u32(static_cast<std::uint32_t>(st.sessions.size()));
    for (const auto& [id, s] : st.sessions) {
        w.str(id);
        w.str(s.ue);
        w.str(s.state);
        w.u64(s.policy_version);
        w.str(s.anchor);
    }
    w.u32(static_cast<std::uint32_t>(st.applied_ops.size()));
    for (const OpId& id : st.applied_ops) {
        w.u32(id.node);
        w.u64(id.seq);
    }
    return siphash24(kDigestKey, w.bytes());
}

// All authorities' active grant tables, keyed and ordered by authority id.
inline std::uint64_t digest_grant_tables(
    const std::map<AuthorityId, std::map<GrantId, Grant>>& tables) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(tables.size()));
    for (const auto& [authority, grants] : tables) {
        w.str(authority);
        w.u32(static_cast<std::uint32_t>(grants.size()));
        for (const auto& [id, g] : grants) {
            w.u64(id);
            w.u64(g.token);
            w.u32(g.holder);
            w.u32(g.band);
            w.u32(g.region);
            w.i64(g.window.start.us());
            w.i64(g.window.end.us());
            w.f64(g.power_cap_dbm);
        }
    }
    return siphash24(kDigestKey, w.bytes());
}

// ---- report -------------------------------------------------------------------

struct NodeDigest {
    NodeId node = 0;
    std::string mode;       // final control-plane mode
    std::uint64_t lamport = 0;
    std::uint64_t journal_len = 0; // unpruned journal entries at end of run
    std::uint64_t buffered_packets = 0;
    std::uint64_t buffered_bytes = 0;
    std::int64_t region = -1;
    std::string radio_state; // granted | pending | silent
};

struct MetricsReport {
    std::string scenario;
    std::uint64_t seed = 0;
    SimTime duration;
    SimTime finished_at;
    std::vector<TraceRecord> records;
    Counters counters;
    std::uint64_t amf_state_digest = 0;
    std::uint64_t grant_table_digest = 0;
    std::vector<NodeDigest> nodes;

    bool empty() const {
        return records.empty() && counters == Counters{} && nodes.empty() &&
               amf_state_digest == 0 && grant_table_digest == 0;
    }
};

// ---- record serialization --------------------------------------------------------

namespace metrics_detail {

using Json = nlohmann::ordered_json;

inline Json to_json(const TransmissionRecord& r) {
    return Json{{"kind", "transmission"},
                {"at_us", r.at.us()},
                {"sender", r.sender},
                {"link", r.link.value},
                {"role", bearer_role_name(r.role)},
                {"category", msg_category_name(r.category)},
                {"size_bytes", r.size_bytes},
                {"dropped", r.dropped},
                {"drop_reason", r.dropped ? drop_reason_name(r.drop_reason) : ""},
                {"delivered_at_us", r.dropped ? -1 : r.delivered_at.us()}};
}

inline Json to_json(const RadioTxRecord& r) {
    return Json{{"kind", "radio_tx"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"band", r.band},
                {"region", r.region},
                {"power_dbm", r.power_dbm},
                {"grant", r.grant},
                {"category", msg_category_name(r.category)}};
}

inline Json to_json(const ModeTransitionRecord& r) {
    return Json{{"kind", "mode_transition"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"from", r.from},
                {"to", r.to}};
}

inline Json to_json(const ControlOpRecord& r) {
    return Json{{"kind", "control_op"},
                {"at_us", r.at.us()},
                {"origin", r.origin},
                {"seq", r.seq},
                {"lamport", r.lamport},
                {"op", r.kind},
                {"subject", r.subject},
                {"params", r.params}};
}

inline Json to_json(const ControlResponseRecord& r) {
    return Json{{"kind", "control_response"},
                {"requested_at_us", r.requested_at.us()},
                {"responded_at_us", r.responded_at.us()},
                {"node", r.node},
                {"seq", r.seq},
                {"op", r.kind},
                {"subject", r.subject},
                {"served_mode", r.served_mode},
                {"accepted", r.accepted},
                {"reject_reason", r.reject_reason}};
}

inline Json to_json(const ReconcileRecord& r) {
    return Json{{"kind", "reconcile"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"uploaded", r.uploaded},
                {"applied", r.applied},
                {"rejected", r.rejected},
                {"duration_us", r.duration.us()}};
}

inline Json to_json(const CensusRecord& r) {
    return Json{{"kind", "census"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"sessions", r.sessions}};
}

inline Json to_json(const AnchorMigrationRecord& r) {
    return Json{{"kind", "anchor_migration"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"session", r.session},
                {"from", r.from},
                {"to", r.to}};
}

inline Json to_json(const PacketOutcomeRecord& r) {
    return Json{{"kind", "packet_outcome"},
                {"at_us", r.at.us()},
                {"pkt", r.pkt},
                {"session", r.session},
                {"origin", r.origin},
                {"outcome", r.outcome},
                {"drop_reason", r.drop_reason},
                {"latency_us", r.latency.us()},
                {"hops", r.hops}};
}

inline Json to_json(const BearerSwitchRecord& r) {
    return Json{{"kind", "bearer_switch"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"vif", r.vif},
                {"from", r.from},
                {"to", r.to},
                {"to_link_up", r.to_link_up}};
}

inline Json to_json(const RouteEventRecord& r) {
    return Json{{"kind", "route_event"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"event", r.kind},
                {"seq", r.seq},
                {"path", r.path}};
}

inline Json to_json(const SpectrumDecisionRecord& r) {
    return Json{{"kind", "spectrum_decision"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"region", r.region},
                {"band", r.band},
                {"decision", r.decision},
                {"reason", r.reason},
                {"latency_us", r.latency.us()},
                {"grant", r.grant}};
}

inline Json to_json(const GrantEventRecord& r) {
    return Json{{"kind", "grant_event"},
                {"at_us", r.at.us()},
                {"event", r.kind},
                {"grant", r.grant},
                {"authority", r.authority},
                {"node", r.node},
                {"band", r.band},
                {"region", r.region},
                {"window_start_us", r.window_start.us()},
                {"window_end_us", r.window_end.us()},
                {"power_cap_dbm", r.power_cap_dbm}};
}

inline Json to_json(const RegionChangeRecord& r) {
    return Json{{"kind", "region_change"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"from", r.from},
                {"to", r.to}};
}

inline Json to_json(const RadioStateRecord& r) {
    return Json{{"kind", "radio_state"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"region", r.region},
                {"state", r.state}};
}

inline Json to_json(const GatewayRecord& r) {
    return Json{{"kind", "gateway"},
                {"at_us", r.at.us()},
                {"node", r.node},
                {"gateway", r.gateway}};
}

inline Json to_json(const ViolationRecord& r) {
    return Json{{"kind", "violation"}, {"at_us", r.at.us()}, {"event", r.kind}, {"detail", r.detail}};
}

inline Json counters_to_json(const Counters& c) {
    Json j = Json::object();
    j["events_processed"] = c.events_processed;
    j["tx_attempts"] = c.tx_attempts;
    j["tx_delivered"] = c.tx_delivered;
    j["tx_dropped"] = c.tx_dropped;
    j["packets_sent"] = c.packets_sent;
    j["packets_delivered"] = c.packets_delivered;
    j["packets_duplicate_suppressed"] = c.packets_duplicate_suppressed;
    j["packets_dropped"] = c.packets_dropped;
    j["packets_buffered_at_end"] = c.packets_buffered_at_end;
    j["control_requests"] = c.control_requests;
    j["control_served"] = c.control_served;
    j["control_rejected"] = c.control_rejected;
    j["mode_transitions"] = c.mode_transitions;
    j["reconciles"] = c.reconciles;
    j["reconcile_applied"] = c.reconcile_applied;
    j["reconcile_rejected"] = c.reconcile_rejected;
    j["census_reports"] = c.census_reports;
    j["bearer_switches"] = c.bearer_switches;
    j["beacons_sent"] = c.beacons_sent;
    j["beacons_accepted"] = c.beacons_accepted;
    j["beacons_rejected"] = c.beacons_rejected;
    j["peers_expired"] = c.peers_expired;
    j["rreq_sent"] = c.rreq_sent;
    j["rreq_forwarded"] = c.rreq_forwarded;
    j["rrep_sent"] = c.rrep_sent;
    j["routes_established"] = c.routes_established;
    j["route_errors"] = c.route_errors;
    j["route_discovery_failures"] = c.route_discovery_failures;
    j["spectrum_requests"] = c.spectrum_requests;
    j["grants_issued"] = c.grants_issued;
    j["denials"] = c.denials;
    j["grants_released"] = c.grants_released;
    j["grants_expired"] = c.grants_expired;
    j["radio_transmissions"] = c.radio_transmissions;
    j["licensing_violations"] = c.licensing_violations;
    j["warning_linkup_noop"] = c.warning_linkup_noop;
    j["warning_linkdown_noop"] = c.warning_linkdown_noop;
    return j;
}

} // namespace metrics_detail

// One JSON object per line, fixed key order, all times as integer
// microseconds: the emitted bytes are a pure function of the report.
inline void emit_metrics(const MetricsReport& r, std::ostream& os) {
    using metrics_detail::Json;
    Json header{{"type", "header"},
                {"format", "nomadsim.metrics.v1"},
                {"scenario", r.scenario},
                {"seed", r.seed},
                {"duration_us", r.duration.us()},
                {"finished_at_us", r.finished_at.us()},
                {"records", r.records.size()}};
    os << header.dump() << '\n';
    if (r.empty()) return;

    auto with_type = [](const char* type, Json body) {
        Json line{{"type", type}};
        for (auto& [k, v] : body.items()) line[k] = std::move(v);
        return line;
    };

    for (const auto& rec : r.records) {
        Json body = std::visit([](const auto& x) { return metrics_detail::to_json(x); }, rec);
        os << with_type("record", std::move(body)).dump() << '\n';
    }

    os << with_type("counters", metrics_detail::counters_to_json(r.counters)).dump() << '\n';

    Json digest{{"type", "digest"},
                {"amf_state", to_hex(r.amf_state_digest)},
                {"grant_table", to_hex(r.grant_table_digest)}};
    digest["nodes"] = Json::array();
    for (const auto& n : r.nodes) {
        digest["nodes"].push_back({{"node", n.node},
                                   {"mode", n.mode},
                                   {"lamport", n.lamport},
                                   {"journal", n.journal_len},
                                   {"buffered_packets", n.buffered_packets},
                                   {"buffered_bytes", n.buffered_bytes},
                                   {"region", n.region},
                                   {"radio", n.radio_state}});
    }
    os << digest.dump() << '\n';
}

inline std::string metrics_to_string(const MetricsReport& r) {
    std::ostringstream os;
    emit_metrics(r, os);
    return os.str();
}

inline void emit_metrics_file(const MetricsReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SimError(ErrorCode::IoError, "cannot write '" + path + "'");
    emit_metrics(r, out);
    if (!out) throw SimError(ErrorCode::IoError, "write failed for '" + path + "'");
}

} // namespace nomadsim
