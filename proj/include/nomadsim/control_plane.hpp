#pragma once

#include "nomadsim/config.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/time.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nomadsim {

// ---- control-plane modes ----------------------------------------------------

enum class N2Mode { Connected, Isolated, Reconciling };

inline const char* n2_mode_name(N2Mode m) {
    switch (m) {
        case N2Mode::Connected: return "connected";
        case N2Mode::Isolated: return "isolated";
        case N2Mode::Reconciling: return "reconciling";
    }
    return "?";
}

// Tracks backhaul liveness into the three-mode machine. Loss must persist for
// the hysteresis window before isolation is declared; recovery acts at once.
// Allowed transitions: CONNECTED->ISOLATED, ISOLATED->RECONCILING,
// RECONCILING->CONNECTED, RECONCILING->ISOLATED.
class ModeMachine {
public:
    explicit ModeMachine(bool backhaul_up)
        : mode_(backhaul_up ? N2Mode::Connected : N2Mode::Isolated) {
        if (!backhaul_up) down_since_ = SimTime{}; // diverged from the start
    }

    N2Mode mode() const { return mode_; }

    // When the current isolation began; meaningful while not CONNECTED.
    SimTime diverged_at() const { return diverged_at_; }

    // Feeds a backhaul observation. Returns the new mode if it changed.
    std::optional<N2Mode> on_backhaul(bool up, SimTime now, const SimConfig& cfg) {
        if (up) {
            down_since_.reset();
            if (mode_ == N2Mode::Isolated) return set(N2Mode::Reconciling);
            return std::nullopt;
        }
        if (!down_since_) down_since_ = now;
        return check_hysteresis(now, cfg);
    }

    // Re-polls the pending-loss clock; drive it at down_since + hysteresis.
    std::optional<N2Mode> check_hysteresis(SimTime now, const SimConfig& cfg) {
        if (!down_since_ || mode_ == N2Mode::Isolated) return std::nullopt;
        if (now - *down_since_ < cfg.backhaul_loss_hysteresis) return std::nullopt;
        // Losing the link mid-reconcile resumes the SAME divergence (the
        // journal was never accepted), so only a fresh CONNECTED->ISOLATED
        // fall restarts the divergence clock.
        if (mode_ == N2Mode::Connected) diverged_at_ = *down_since_;
        return set(N2Mode::Isolated);
    }

    std::optional<SimTime> loss_pending_until(const SimConfig& cfg) const {
        if (!down_since_ || mode_ == N2Mode::Isolated) return std::nullopt;
        return *down_since_ + cfg.backhaul_loss_hysteresis;
    }

    // Reconcile finished while the backhaul held: back to CONNECTED.
    std::optional<N2Mode> on_reconcile_complete() {
        if (mode_ != N2Mode::Reconciling) return std::nullopt;
        return set(N2Mode::Connected);
    }

private:
    std::optional<N2Mode> set(N2Mode m) {
        if (m == mode_) return std::nullopt;
        mode_ = m;
        return m;
    }

    N2Mode mode_;
    std::optional<SimTime> down_since_;
    SimTime diverged_at_; // start of the isolation currently being reconciled
};

// ---- control operations ------------------------------------------------------

enum class OpKind { Register, SessionCreate, SessionModify, SessionRelease, Handover, PolicyUpdate };

inline const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Register: return "REGISTER";
        case OpKind::SessionCreate: return "SESSION_CREATE";
        case OpKind::SessionModify: return "SESSION_MODIFY";
        case OpKind::SessionRelease: return "SESSION_RELEASE";
        case OpKind::Handover: return "HANDOVER";
        case OpKind::PolicyUpdate: return "POLICY_UPDATE";
    }
    return "?";
}

inline std::optional<OpKind> op_kind_from(const std::string& s) {
    for (OpKind k : {OpKind::Register, OpKind::SessionCreate, OpKind::SessionModify,
                     OpKind::SessionRelease, OpKind::Handover, OpKind::PolicyUpdate}) {
        if (s == op_kind_name(k)) return k;
    }
    return std::nullopt;
}

struct OpId {
    NodeId node = 0;
    std::uint64_t seq = 0;
    auto operator<=>(const OpId&) const = default;
};

struct ControlOp {
    OpId id;
    std::uint64_t lamport = 0;
    OpKind kind = OpKind::Register;
    std::string subject; // UE id or session id, per kind
    std::map<std::string, std::string> params;
};

// The reconciliation total order: (lamport, node, seq) ascending.
struct MergeKey {
    std::uint64_t lamport;
    NodeId node;
    std::uint64_t seq;
    auto operator<=>(const MergeKey&) const = default;
};

inline MergeKey merge_key(const ControlOp& op) {
    return {op.lamport, op.id.node, op.id.seq};
}

inline std::vector<ControlOp> merge_order(std::vector<ControlOp> ops) {
    std::set<OpId> seen;
    for (const auto& op : ops) {
        if (!seen.insert(op.id).second) {
            throw SimError(ErrorCode::DuplicateOpId,
                           "duplicate op (" + std::to_string(op.id.node) + "," +
                               std::to_string(op.id.seq) + ")");
        }
    }
    std::sort(ops.begin(), ops.end(), [](const ControlOp& a, const ControlOp& b) {
        return merge_key(a) < merge_key(b);
    });
    return ops;
}

// ---- journal -----------------------------------------------------------------

class Journal {
public:
    explicit Journal(NodeId node = 0) : node_(node) {}

    NodeId node() const { return node_; }
    const std::vector<ControlOp>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    void append(const ControlOp& op) {
        if (!entries_.empty()) {
            const ControlOp& last = entries_.back();
            if (std::pair{op.lamport, op.id.seq} <= std::pair{last.lamport, last.id.seq}) {
                throw SimError(ErrorCode::Internal, "journal not monotonic");
            }
        }
        entries_.push_back(op);
    }

    // Drops everything up to and including the reconcile point.
    void prune_through(std::uint64_t seq) {
        std::erase_if(entries_, [&](const ControlOp& op) { return op.id.seq <= seq; });
    }

private:
    NodeId node_;
    std::vector<ControlOp> entries_;
};

// ---- AMF state and op application ---------------------------------------------

struct Registration {
    std::string ue;
    std::uint64_t version = 0; // bumped by every re-REGISTER
    std::string serving;       // last HANDOVER target, empty before any
    bool operator==(const Registration&) const = default;
};

// Session anchors live inside the control state so reconciliation moves them:
// ops applied on an isolated node anchor at that node's proxy; the same ops
// replayed centrally anchor at the central UPF. Overwriting the local state
// with the central result at reconcile completion IS the anchor migration.
inline std::string central_anchor() { return "CENTRAL_UPF"; }
inline std::string proxy_anchor(NodeId n) { return "PROXY_UPF:" + std::to_string(n); }

struct Session {
    std::string id;
    std::string ue;
    std::string state = "active"; // active | modified:<tag>
    std::uint64_t policy_version = 0;
    std::string anchor;
    bool operator==(const Session&) const = default;
};

struct AmfState {
    std::map<std::string, Registration> registrations;
    std::map<std::string, Session> sessions;
    std::set<OpId> applied_ops;
    bool operator==(const AmfState&) const = default;
};

struct ApplyResult {
    bool applied = false;
    bool duplicate = false;
    std::string reject_reason; // set when neither applied nor duplicate
};

// Applies one op. `proxy` names the node whose local UPF anchors sessions
// created here; nullopt means the central UPF. Rejections leave the state
// untouched and are never recorded in applied_ops.
inline ApplyResult apply_op(AmfState& st, const ControlOp& op,
                            std::optional<NodeId> proxy = std::nullopt) {
    if (st.applied_ops.count(op.id)) return {.applied = false, .duplicate = true, .reject_reason = ""};

    auto reject = [](std::string why) { return ApplyResult{false, false, std::move(why)}; };
    auto param = [&](const char* key) -> std::optional<std::string> {
        auto it = op.params.find(key);
        if (it == op.params.end()) return std::nullopt;
        return it->second;
    };

    switch (op.kind) {
        case OpKind::Register: {
            Registration& r = st.registrations[op.subject];
            r.ue = op.subject;
            ++r.version;
            break;
        }
        case OpKind::SessionCreate: {
            auto ue = param("ue");
            if (!ue) return reject("MissingUeParam");
            if (!st.registrations.count(*ue)) return reject("UnknownUe");
            if (st.sessions.count(op.subject)) return reject("SessionExists");
            Session s;
            s.id = op.subject;
            s.ue = *ue;
            s.anchor = proxy ? proxy_anchor(*proxy) : central_anchor();
            st.sessions.emplace(op.subject, std::move(s));
            break;
        }
        case OpKind::SessionModify: {
            auto it = st.sessions.find(op.subject);
            if (it == st.sessions.end()) return reject("UnknownSession");
            it->second.state = "modified:" + param("state").value_or("default");
            break;
        }
        case OpKind::SessionRelease: {
            if (!st.sessions.erase(op.subject)) return reject("UnknownSession");
            break;
        }
        case OpKind::Handover: {
            auto it = st.registrations.find(op.subject);
            if (it == st.registrations.end()) return reject("UnknownUe");
            it->second.serving = param("target").value_or("");
            break;
        }
        case OpKind::PolicyUpdate: {
            auto it = st.sessions.find(op.subject);
            if (it == st.sessions.end()) return reject("UnknownSession");
            std::uint64_t ver = op.lamport; // default: the op's own clock value
            if (auto v = param("version")) {
                char* end = nullptr;
                ver = std::strtoull(v->c_str(), &end, 10);
                if (end == v->c_str() || *end != '\0') return reject("BadVersionParam");
            }
            it->second.policy_version = ver;
            break;
        }
    }
    st.applied_ops.insert(op.id);
    return {.applied = true, .duplicate = false, .reject_reason = ""};
}

// ---- central side / reconciliation ---------------------------------------------

struct ReconcileReport {
    std::uint64_t uploaded = 0;
    std::uint64_t applied = 0;   // journal ops newly applied
    std::uint64_t rejected = 0;  // journal ops semantically rejected at replay
    std::uint64_t replayed = 0;  // central ops re-ordered into the merge
    std::vector<OpId> rejected_ids;
};

// The central AMF: authoritative state plus the apply-order log that
// reconciliation replays from. Each log entry remembers when it (last)
// applied so "ops since divergence" is a timestamp slice.
class CentralAmf {
public:
    const AmfState& state() const { return state_; }
    std::uint64_t lamport() const { return lamport_; }

    // Lamport upkeep: local events tick, received messages join clocks.
    std::uint64_t tick() { return ++lamport_; }
    void observe(std::uint64_t remote) { lamport_ = std::max(lamport_, remote); }

    // Applies one op arriving on the live N2 path (node CONNECTED) or
    // originated centrally. Duplicates re-report their original outcome.
    ApplyResult apply_live(const ControlOp& op, SimTime now) {
        observe(op.lamport);
        tick();
        if (state_.applied_ops.count(op.id)) return {.applied = false, .duplicate = true, .reject_reason = ""};
        ApplyResult r = apply_op(state_, op, std::nullopt);
        if (r.applied) log_.push_back({now, op});
        return r;
    }

    // Journal reconciliation. Replays merge_order(new journal ops + every
    // central op applied since the node diverged) onto the state as it stood
    // at divergence; semantic rejections are reported, dropped, and never
    // retried from the log. Deterministic for a given (log, journal, times).
    ReconcileReport reconcile(const std::vector<ControlOp>& journal, SimTime diverged_at,
                              SimTime now) {
        ReconcileReport rep;
        rep.uploaded = journal.size();

        std::vector<LogEntry> head;
        std::vector<ControlOp> tail;
        for (const auto& e : log_) {
            if (e.applied_at < diverged_at) head.push_back(e);
            else tail.push_back(e.op);
        }

        AmfState pre;
        for (const auto& e : head) apply_op(pre, e.op, std::nullopt);

        std::vector<ControlOp> merged = tail;
        std::set<OpId> from_journal;
        for (const auto& op : journal) {
            if (!state_.applied_ops.count(op.id)) {
                merged.push_back(op);
                from_journal.insert(op.id);
            }
            observe(op.lamport);
        }
        tick();
        merged = merge_order(std::move(merged));

        std::vector<LogEntry> new_log = head;
        for (const auto& op : merged) {
            ApplyResult r = apply_op(pre, op, std::nullopt);
            bool novel = from_journal.count(op.id) > 0;
            if (r.applied) {
                new_log.push_back({now, op});
                if (novel) ++rep.applied;
                else ++rep.replayed;
            } else if (!r.duplicate && novel) {
                ++rep.rejected;
                rep.rejected_ids.push_back(op.id);
            }
        }
        // Journal ops that were already known count as applied-by-dedup.
        state_ = std::move(pre);
        log_ = std::move(new_log);
        return rep;
    }

    std::vector<ControlOp> log_ops() const {
        std::vector<ControlOp> out;
        out.reserve(log_.size());
        for (const auto& e : log_) out.push_back(e.op);
        return out;
    }

private:
    struct LogEntry {
        SimTime applied_at;
        ControlOp op;
    };

    AmfState state_;
    std::vector<LogEntry> log_;
    std::uint64_t lamport_ = 0;
};

} // namespace nomadsim
