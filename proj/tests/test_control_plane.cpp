#include <catch_amalgamated.hpp>

#include <nomadsim/nomadsim.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

using namespace nomadsim;
using namespace nomadsim::literals;

// ---- mode machine -----------------------------------------------------------

TEST_CASE("mode machine boots CONNECTED or ISOLATED from link state") {
    REQUIRE(ModeMachine(true).mode() == N2Mode::Connected);
    ModeMachine cold(false);
    REQUIRE(cold.mode() == N2Mode::Isolated);
    REQUIRE(cold.diverged_at() == SimTime::zero());
}

TEST_CASE("isolation is declared only after sustained loss") {
    SimConfig cfg; // 2 s hysteresis
    ModeMachine m(true);

    REQUIRE_FALSE(m.on_backhaul(false, 10_sec, cfg).has_value());
    REQUIRE(m.loss_pending_until(cfg) == 12_sec);
    REQUIRE_FALSE(m.check_hysteresis(SimTime::from_us(11'999'999), cfg).has_value());
    // Exactly at the boundary the loss has persisted for the full window.
    REQUIRE(m.check_hysteresis(12_sec, cfg) == N2Mode::Isolated);
    REQUIRE(m.mode() == N2Mode::Isolated);
    REQUIRE(m.diverged_at() == 10_sec);
    REQUIRE_FALSE(m.loss_pending_until(cfg).has_value());
}

TEST_CASE("a short blip never leaves CONNECTED") {
    SimConfig cfg;
    ModeMachine m(true);
    m.on_backhaul(false, 10_sec, cfg);
    REQUIRE_FALSE(m.on_backhaul(true, 11_sec, cfg).has_value()); // back within 2 s
    REQUIRE(m.mode() == N2Mode::Connected);
    // The stale deadline no longer isolates.
    REQUIRE_FALSE(m.check_hysteresis(12_sec, cfg).has_value());
}

TEST_CASE("recovery from isolation enters RECONCILING immediately") {
    SimConfig cfg;
    ModeMachine m(true);
    m.on_backhaul(false, 10_sec, cfg);
    m.check_hysteresis(12_sec, cfg);
    REQUIRE(m.on_backhaul(true, 70_sec, cfg) == N2Mode::Reconciling);
    REQUIRE(m.diverged_at() == 10_sec); // unchanged by recovery
    REQUIRE(m.on_reconcile_complete() == N2Mode::Connected);
    REQUIRE_FALSE(m.on_reconcile_complete().has_value()); // already done
}

TEST_CASE("losing the link mid-reconcile resumes the same divergence") {
    SimConfig cfg;
    ModeMachine m(true);
    m.on_backhaul(false, 10_sec, cfg);
    m.check_hysteresis(12_sec, cfg);
    m.on_backhaul(true, 70_sec, cfg); // RECONCILING
    m.on_backhaul(false, 71_sec, cfg);
    REQUIRE(m.mode() == N2Mode::Reconciling); // hysteresis applies here too
    REQUIRE(m.check_hysteresis(73_sec, cfg) == N2Mode::Isolated);
    // The journal was never accepted: still the original divergence point.
    REQUIRE(m.diverged_at() == 10_sec);
}

// ---- merge order ------------------------------------------------------------

namespace {

ControlOp make_op(NodeId node, std::uint64_t seq, std::uint64_t lamport, OpKind kind,
                  std::string subject,
                  std::map<std::string, std::string> params = {}) {
    ControlOp op;
    op.id = {node, seq};
    op.lamport = lamport;
    op.kind = kind;
    op.subject = std::move(subject);
    op.params = std::move(params);
    return op;
}

} // namespace

TEST_CASE("merge_order sorts by (lamport, node, seq)") {
    std::vector<ControlOp> ops{
        make_op(2, 1, 5, OpKind::Register, "a"),
        make_op(1, 9, 5, OpKind::Register, "b"),
        make_op(1, 2, 3, OpKind::Register, "c"),
        make_op(1, 1, 3, OpKind::Register, "d"),
        make_op(3, 1, 1, OpKind::Register, "e"),
    };
    const auto sorted = merge_order(ops);
    std::vector<std::string> subjects;
    for (const auto& op : sorted) subjects.push_back(op.subject);
    REQUIRE(subjects == std::vector<std::string>{"e", "d", "c", "b", "a"});
}

TEST_CASE("merge_order agrees with a plain sort over random permutations") {
    Rng rng = derive_stream(11, stream_tag::kHarness, 2);
    for (int round = 0; round < 50; ++round) {
        std::vector<ControlOp> ops;
        const int n = static_cast<int>(1 + rng.next_u64() % 12);
        for (int i = 0; i < n; ++i) {
            ops.push_back(make_op(static_cast<NodeId>(1 + rng.next_u64() % 3),
                                  static_cast<std::uint64_t>(i + 1),
                                  1 + rng.next_u64() % 6, OpKind::Register, "u"));
        }
        auto expected = ops;
        std::sort(expected.begin(), expected.end(), [](const ControlOp& a, const ControlOp& b) {
            return std::tuple{a.lamport, a.id.node, a.id.seq} <
                   std::tuple{b.lamport, b.id.node, b.id.seq};
        });
        const auto got = merge_order(ops);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i].id == expected[i].id);
        }
    }
}

TEST_CASE("merge_order refuses duplicate op ids") {
    std::vector<ControlOp> ops{
        make_op(1, 1, 1, OpKind::Register, "a"),
        make_op(1, 1, 2, OpKind::Register, "b"),
    };
    try {
        merge_order(ops);
        FAIL("expected DuplicateOpId");
    } catch (const SimError& e) {
        REQUIRE(e.code() == ErrorCode::DuplicateOpId);
    }
}

// ---- journal ----------------------------------------------------------------

TEST_CASE("journal appends must advance (lamport, seq)") {
    Journal j(1);
    j.append(make_op(1, 1, 5, OpKind::Register, "a"));
    j.append(make_op(1, 2, 5, OpKind::Register, "b")); // same lamport, higher seq: fine
    REQUIRE_THROWS_AS(j.append(make_op(1, 2, 5, OpKind::Register, "c")), SimError);
    REQUIRE_THROWS_AS(j.append(make_op(1, 3, 4, OpKind::Register, "d")), SimError);
    REQUIRE(j.size() == 2);

    j.prune_through(1);
    REQUIRE(j.size() == 1);
    REQUIRE(j.entries().front().id.seq == 2);
    j.prune_through(2);
    REQUIRE(j.empty());
}

// ---- op application ----------------------------------------------------------

TEST_CASE("apply_op implements each operation kind") {
    AmfState st;

    // REGISTER creates and re-REGISTER bumps the version.
    REQUIRE(apply_op(st, make_op(1, 1, 1, OpKind::Register, "ue1")).applied);
    REQUIRE(st.registrations.at("ue1").version == 1);
    REQUIRE(apply_op(st, make_op(1, 2, 2, OpKind::Register, "ue1")).applied);
    REQUIRE(st.registrations.at("ue1").version == 2);

    // SESSION_CREATE needs a ue param naming a registered UE.
    auto miss = apply_op(st, make_op(1, 3, 3, OpKind::SessionCreate, "s1"));
    REQUIRE_FALSE(miss.applied);
    REQUIRE(miss.reject_reason == "MissingUeParam");
    auto unknown = apply_op(st, make_op(1, 4, 4, OpKind::SessionCreate, "s1", {{"ue", "ghost"}}));
    REQUIRE(unknown.reject_reason == "UnknownUe");
    REQUIRE(apply_op(st, make_op(1, 5, 5, OpKind::SessionCreate, "s1", {{"ue", "ue1"}})).applied);
    REQUIRE(st.sessions.at("s1").ue == "ue1");
    REQUIRE(st.sessions.at("s1").state == "active");
    auto dup_sess = apply_op(st, make_op(1, 6, 6, OpKind::SessionCreate, "s1", {{"ue", "ue1"}}));
    REQUIRE(dup_sess.reject_reason == "SessionExists");

    // SESSION_MODIFY tags the state.
    REQUIRE(apply_op(st, make_op(1, 7, 7, OpKind::SessionModify, "s1", {{"state", "throttled"}}))
                .applied);
    REQUIRE(st.sessions.at("s1").state == "modified:throttled");
    REQUIRE(apply_op(st, make_op(1, 8, 8, OpKind::SessionModify, "nope")).reject_reason ==
            "UnknownSession");

    // HANDOVER retargets a registration.
    REQUIRE(apply_op(st, make_op(1, 9, 9, OpKind::Handover, "ue1", {{"target", "cell-7"}})).applied);
    REQUIRE(st.registrations.at("ue1").serving == "cell-7");
    REQUIRE(apply_op(st, make_op(1, 10, 10, OpKind::Handover, "ghost")).reject_reason ==
            "UnknownUe");

    // POLICY_UPDATE parses an explicit version or falls back to the lamport.
    REQUIRE(apply_op(st, make_op(1, 11, 11, OpKind::PolicyUpdate, "s1", {{"version", "42"}}))
                .applied);
    REQUIRE(st.sessions.at("s1").policy_version == 42);
    REQUIRE(apply_op(st, make_op(1, 12, 99, OpKind::PolicyUpdate, "s1")).applied);
    REQUIRE(st.sessions.at("s1").policy_version == 99);
    REQUIRE(apply_op(st, make_op(1, 13, 13, OpKind::PolicyUpdate, "s1", {{"version", "x7"}}))
                .reject_reason == "BadVersionParam");
    REQUIRE(st.sessions.at("s1").policy_version == 99); // rejection left it alone

    // SESSION_RELEASE removes the session.
    REQUIRE(apply_op(st, make_op(1, 14, 14, OpKind::SessionRelease, "s1")).applied);
    REQUIRE(st.sessions.empty());
    REQUIRE(apply_op(st, make_op(1, 15, 15, OpKind::SessionRelease, "s1")).reject_reason ==
            "UnknownSession");
}

TEST_CASE("apply_op deduplicates by op id and never re-applies") {
    AmfState st;
    const auto op = make_op(1, 1, 1, OpKind::Register, "ue1");
    REQUIRE(apply_op(st, op).applied);
    const auto again = apply_op(st, op);
    REQUIRE_FALSE(again.applied);
    REQUIRE(again.duplicate);
    REQUIRE(st.registrations.at("ue1").version == 1); // not bumped twice
}

TEST_CASE("rejected ops leave no trace in applied_ops") {
    AmfState st;
    const auto op = make_op(1, 1, 1, OpKind::SessionModify, "ghost");
    REQUIRE_FALSE(apply_op(st, op).applied);
    REQUIRE(st.applied_ops.empty());
    // The same id can later succeed.
    REQUIRE(apply_op(st, make_op(1, 2, 2, OpKind::Register, "u")).applied);
}

TEST_CASE("session anchors follow the applying side") {
    AmfState local, central;
    apply_op(local, make_op(3, 1, 1, OpKind::Register, "ue1"), 3);
    apply_op(local, make_op(3, 2, 2, OpKind::SessionCreate, "s1", {{"ue", "ue1"}}), 3);
    REQUIRE(local.sessions.at("s1").anchor == "PROXY_UPF:3");

    apply_op(central, make_op(3, 1, 1, OpKind::Register, "ue1"));
    apply_op(central, make_op(3, 2, 2, OpKind::SessionCreate, "s1", {{"ue", "ue1"}}));
    REQUIRE(central.sessions.at("s1").anchor == "CENTRAL_UPF");

    REQUIRE(proxy_anchor(3) == "PROXY_UPF:3");
    REQUIRE(central_anchor() == "CENTRAL_UPF");
}

// ---- central reconciliation ---------------------------------------------------

TEST_CASE("apply_live joins lamport clocks and deduplicates") {
    CentralAmf amf;
    auto op = make_op(1, 1, 17, OpKind::Register, "ue1");
    REQUIRE(amf.apply_live(op, 1_sec).applied);
    REQUIRE(amf.lamport() > 17); // observed then ticked
    REQUIRE(amf.apply_live(op, 2_sec).duplicate);
    REQUIRE(amf.state().registrations.at("ue1").version == 1);
    REQUIRE(amf.log_ops().size() == 1);
}

namespace {

struct ReconcileScript {
    CentralAmf amf;
    // Shadow of the live path, maintained with test-side bookkeeping only.
    AmfState shadow_live;
    std::vector<std::pair<SimTime, ControlOp>> shadow_log;

    void live(const ControlOp& op, SimTime at) {
        amf.apply_live(op, at);
        AmfState probe = shadow_live; // apply_op mutates; keep reject semantics exact
        if (apply_op(probe, op).applied) {
            shadow_live = std::move(probe);
            shadow_log.emplace_back(at, op);
        }
    }

    // Independent reenactment of the reconcile contract: split the log at the
    // divergence instant, replay the head, then the merge-ordered union of
    // the tail and the novel journal ops.
    AmfState oracle(const std::vector<ControlOp>& journal, SimTime diverged_at) const {
        AmfState st;
        std::vector<ControlOp> merged;
        for (const auto& [at, op] : shadow_log) {
            if (at < diverged_at) apply_op(st, op);
            else merged.push_back(op);
        }
        for (const auto& op : journal) {
            if (!shadow_live.applied_ops.count(op.id)) merged.push_back(op);
        }
        std::sort(merged.begin(), merged.end(), [](const ControlOp& a, const ControlOp& b) {
            return std::tuple{a.lamport, a.id.node, a.id.seq} <
                   std::tuple{b.lamport, b.id.node, b.id.seq};
        });
        for (const auto& op : merged) apply_op(st, op);
        return st;
    }
};

ControlOp random_op(Rng& rng, NodeId node, std::uint64_t seq, std::uint64_t lamport) {
    static const std::vector<OpKind> kinds{OpKind::Register,       OpKind::SessionCreate,
                                           OpKind::SessionModify,  OpKind::SessionRelease,
                                           OpKind::Handover,       OpKind::PolicyUpdate};
    const OpKind kind = kinds[rng.next_u64() % kinds.size()];
    const std::string ue = "u" + std::to_string(rng.next_u64() % 3);
    const std::string sess = "s" + std::to_string(rng.next_u64() % 3);
    std::map<std::string, std::string> params;
    std::string subject;
    switch (kind) {
        case OpKind::Register:
        case OpKind::Handover:
            subject = ue;
            if (kind == OpKind::Handover) params["target"] = "cell-" + std::to_string(rng.next_u64() % 4);
            break;
        case OpKind::SessionCreate:
            subject = sess;
            if (rng.next_u64() % 8 != 0) params["ue"] = ue; // sometimes missing: reject path
            break;
        case OpKind::SessionModify:
            subject = sess;
            params["state"] = "m" + std::to_string(rng.next_u64() % 3);
            break;
        case OpKind::SessionRelease:
            subject = sess;
            break;
        case OpKind::PolicyUpdate:
            subject = sess;
            switch (rng.next_u64() % 3) {
                case 0: params["version"] = std::to_string(rng.next_u64() % 50); break;
                case 1: params["version"] = "junk"; break; // BadVersionParam path
                default: break;                            // lamport fallback
            }
            break;
    }
    return make_op(node, seq, lamport, kind, subject, params);
}

} // namespace

TEST_CASE("reconcile equals the independent split-merge-replay oracle") {
    Rng rng = derive_stream(99, stream_tag::kHarness, 3);
    for (int round = 0; round < 100; ++round) {
        INFO("round " << round);
        ReconcileScript script;
        const SimTime diverged = 10_sec;
        std::uint64_t central_seq = 0;
        std::uint64_t central_lamport = 0;

        // Live ops before the divergence.
        const int pre = static_cast<int>(rng.next_u64() % 6);
        for (int i = 0; i < pre; ++i) {
            central_lamport += 1 + rng.next_u64() % 3;
            script.live(random_op(rng, kCoreNode, ++central_seq, central_lamport),
                        SimTime::from_sec(1 + i));
        }

        // The journal accumulated on the isolated node.
        std::vector<ControlOp> journal;
        std::uint64_t node_lamport = rng.next_u64() % 5;
        const int jn = static_cast<int>(rng.next_u64() % 8);
        for (int i = 0; i < jn; ++i) {
            node_lamport += 1 + rng.next_u64() % 3;
            journal.push_back(random_op(rng, 1, static_cast<std::uint64_t>(i + 1), node_lamport));
        }

        // Some journal entries may already be known centrally (an upload that
        // was acknowledged after the link dropped): feed them live post-divergence.
        for (const auto& op : journal) {
            if (rng.next_u64() % 5 == 0) script.live(op, 11_sec);
        }

        // Central traffic after the divergence.
        const int tail = static_cast<int>(rng.next_u64() % 6);
        for (int i = 0; i < tail; ++i) {
            central_lamport += 1 + rng.next_u64() % 3;
            script.live(random_op(rng, kCoreNode, ++central_seq, central_lamport),
                        SimTime::from_sec(12 + i));
        }

        const AmfState expected = script.oracle(journal, diverged);
        const ReconcileReport rep = script.amf.reconcile(journal, diverged, 60_sec);
        REQUIRE(script.amf.state() == expected);
        REQUIRE(rep.uploaded == journal.size());
        REQUIRE(rep.applied + rep.rejected <= journal.size());
        for (const OpId& id : rep.rejected_ids) {
            const bool from_journal =
                std::any_of(journal.begin(), journal.end(),
                            [&](const ControlOp& op) { return op.id == id; });
            REQUIRE(from_journal);
        }

        // Re-uploading the same journal is absorbed without any state change.
        const AmfState before = script.amf.state();
        const ReconcileReport again = script.amf.reconcile(journal, diverged, 61_sec);
        REQUIRE(again.applied == 0);
        REQUIRE(again.rejected == rep.rejected); // dropped ops re-reject, harmlessly
        REQUIRE(script.amf.state() == before);
    }
}

TEST_CASE("reconcile orders concurrent updates by merge key, not arrival") {
    CentralAmf amf;
    // Connected phase: a registration and a session everyone agrees on.
    amf.apply_live(make_op(1, 1, 1, OpKind::Register, "ue1"), 1_sec);
    amf.apply_live(make_op(1, 2, 2, OpKind::SessionCreate, "s1", {{"ue", "ue1"}}), 2_sec);

    // After divergence the centre sets version 10 (lamport 9); the isolated
    // node set version 7 earlier in logical time (lamport 5).
    amf.apply_live(make_op(kCoreNode, 1, 9, OpKind::PolicyUpdate, "s1", {{"version", "10"}}),
                   20_sec);
    std::vector<ControlOp> journal{
        make_op(1, 3, 5, OpKind::PolicyUpdate, "s1", {{"version", "7"}})};

    const ReconcileReport rep = amf.reconcile(journal, 10_sec, 30_sec);
    REQUIRE(rep.applied == 1);
    REQUIRE(rep.replayed == 1);
    // lamport 5 < 9: the central update is replayed after the journal's, so
    // the centrally-issued version wins the last-writer race.
    REQUIRE(amf.state().sessions.at("s1").policy_version == 10);

    // Flip the logical clocks and the journal wins instead.
    CentralAmf amf2;
    amf2.apply_live(make_op(1, 1, 1, OpKind::Register, "ue1"), 1_sec);
    amf2.apply_live(make_op(1, 2, 2, OpKind::SessionCreate, "s1", {{"ue", "ue1"}}), 2_sec);
    amf2.apply_live(make_op(kCoreNode, 1, 4, OpKind::PolicyUpdate, "s1", {{"version", "10"}}),
                    20_sec);
    std::vector<ControlOp> journal2{
        make_op(1, 3, 8, OpKind::PolicyUpdate, "s1", {{"version", "7"}})};
    amf2.reconcile(journal2, 10_sec, 30_sec);
    REQUIRE(amf2.state().sessions.at("s1").policy_version == 7);
}

TEST_CASE("journal sessions are re-anchored centrally on replay") {
    // Node 2, isolated from the start, created a session under its proxy.
    AmfState local;
    apply_op(local, make_op(2, 1, 1, OpKind::Register, "ue9"), 2);
    apply_op(local, make_op(2, 2, 2, OpKind::SessionCreate, "s9", {{"ue", "ue9"}}), 2);
    REQUIRE(local.sessions.at("s9").anchor == proxy_anchor(2));

    CentralAmf amf;
    std::vector<ControlOp> journal{
        make_op(2, 1, 1, OpKind::Register, "ue9"),
        make_op(2, 2, 2, OpKind::SessionCreate, "s9", {{"ue", "ue9"}}),
    };
    const ReconcileReport rep = amf.reconcile(journal, SimTime::zero(), 5_sec);
    REQUIRE(rep.applied == 2);
    REQUIRE(rep.rejected == 0);
    // The same op lands on the central anchor: adopting this state at the
    // node is what migrates the session off the proxy.
    REQUIRE(amf.state().sessions.at("s9").anchor == central_anchor());
}
