#pragma once

#include "nomadsim/metrics.hpp"
#include "nomadsim/trace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace nomadsim {

// Post-run invariant audits. These work purely on the emitted trace and
// counters, so they hold the simulator to account from the outside: nothing
// here shares state with the machinery that produced the records.

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// ---- licensing soundness ---------------------------------------------------

// Every radio emission must cite a grant that was activated for that same
// node, band, and region, whose window contains the emission instant, and
// whose power cap is respected. Returns one violation per offending record.
inline std::vector<ViolationRecord>
find_unlicensed_transmissions(const std::vector<TraceRecord>& records) {
    std::map<GrantId, GrantEventRecord> activated;
    for (const auto& r : records) {
        if (const auto* g = std::get_if<GrantEventRecord>(&r)) {
            if (g->kind == "activated") activated[g->grant] = *g;
        }
    }
    std::vector<ViolationRecord> out;
    for (const auto& r : records) {
        const auto* tx = std::get_if<RadioTxRecord>(&r);
        if (!tx) continue;
        std::string why;
        if (tx->grant == 0) {
            why = "no grant claimed";
        } else {
            auto it = activated.find(tx->grant);
            if (it == activated.end()) {
                why = "unknown grant id";
            } else {
                const GrantEventRecord& g = it->second;
                if (g.node != tx->node) {
                    why = "grant held by another node";
                } else if (g.band != tx->band) {
                    why = "band outside grant";
                } else if (tx->region < 0 || static_cast<RegionId>(tx->region) != g.region) {
                    why = "region outside grant";
                } else if (tx->at < g.window_start || tx->at >= g.window_end) {
                    why = "instant outside grant window";
                } else if (tx->power_dbm > g.power_cap_dbm) {
                    why = "power above grant cap";
                }
            }
        }
        if (!why.empty()) {
            ViolationRecord v;
            v.at = tx->at;
            v.kind = "unlicensed_transmission";
            v.detail = "node " + std::to_string(tx->node) + " band " + std::to_string(tx->band) +
                       " region " + std::to_string(tx->region) + ": " + why;
            out.push_back(std::move(v));
        }
    }
    return out;
}

inline CheckResult check_licensing(const MetricsReport& r) {
    auto bad = find_unlicensed_transmissions(r.records);
    CheckResult c;
    c.name = "licensing";
    c.passed = bad.empty();
    if (!bad.empty()) {
        c.detail = std::to_string(bad.size()) + " unlicensed transmission(s); first: " +
                   bad.front().detail;
    }
    return c;
}

// ---- packet conservation -----------------------------------------------------

// Every packet handed to the user plane is accounted for exactly once:
// delivered, dropped (with a reason), or still buffered when the run ended.
inline CheckResult check_packet_conservation(const MetricsReport& r) {
    const Counters& c = r.counters;
    std::uint64_t dropped = 0;
    for (const auto& [reason, n] : c.packets_dropped) dropped += n;
    std::uint64_t accounted = c.packets_delivered + dropped + c.packets_buffered_at_end;

    CheckResult out;
    out.name = "packet_conservation";
    out.passed = c.packets_sent == accounted;
    if (!out.passed) {
        std::ostringstream ss;
        ss << "sent=" << c.packets_sent << " != delivered=" << c.packets_delivered
           << " + dropped=" << dropped << " + buffered=" << c.packets_buffered_at_end;
        out.detail = ss.str();
    }
    return out;
}

// ---- targeted silence queries ---------------------------------------------------

// Filter over link-level transmission records. Unset fields match anything.
struct TransmissionQuery {
    std::optional<MsgCategory> category;
    std::optional<BearerRole> role;
    std::optional<TimeWindow> window; // matches the send instant
    std::optional<std::set<NodeId>> senders;
    bool include_dropped = true;
};

inline std::size_t count_transmissions(const std::vector<TraceRecord>& records,
                                       const TransmissionQuery& q) {
    std::size_t n = 0;
    for (const auto& r : records) {
        const auto* tx = std::get_if<TransmissionRecord>(&r);
        if (!tx) continue;
        if (q.category && *q.category != tx->category) continue;
        if (q.role && *q.role != tx->role) continue;
        if (q.window && !q.window->contains(tx->at)) continue;
        if (q.senders && !q.senders->count(tx->sender)) continue;
        if (!q.include_dropped && tx->dropped) continue;
        ++n;
    }
    return n;
}

// Asserts that nothing matching the query was put on the wire at all — the
// shape of claims like "no control traffic crossed the backhaul while the
// node was cut off".
inline CheckResult check_silence(const std::vector<TraceRecord>& records,
                                 const TransmissionQuery& q, const std::string& name) {
    std::size_t n = count_transmissions(records, q);
    CheckResult c;
    c.name = name;
    c.passed = n == 0;
    if (n != 0) c.detail = std::to_string(n) + " matching transmission(s) found";
    return c;
}

// ---- aggregate -------------------------------------------------------------------

inline std::vector<CheckResult> run_all_checks(const MetricsReport& r) {
    return {check_packet_conservation(r), check_licensing(r)};
}

} // namespace nomadsim
