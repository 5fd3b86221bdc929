#pragma once

#include "nomadsim/checkers.hpp"
#include "nomadsim/config.hpp"
#include "nomadsim/control_plane.hpp"
#include "nomadsim/geometry.hpp"
#include "nomadsim/kernel.hpp"
#include "nomadsim/metrics.hpp"
#include "nomadsim/mobility.hpp"
#include "nomadsim/peer.hpp"
#include "nomadsim/scenario.hpp"
#include "nomadsim/spectrum.hpp"
#include "nomadsim/topology.hpp"
#include "nomadsim/trace.hpp"
#include "nomadsim/transport.hpp"
#include "nomadsim/user_plane.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace nomadsim {

// Fixed on-wire sizes for protocol frames; payload-bearing messages scale
// with content so serialization delay tracks what is actually carried.
namespace msg_size {
inline constexpr std::uint64_t kBeacon = 64;
inline constexpr std::uint64_t kRouteCtl = 96;
inline constexpr std::uint64_t kHopAck = 32;
inline constexpr std::uint64_t kProbe = 64;
inline constexpr std::uint64_t kControlOp = 256;
inline constexpr std::uint64_t kControlResp = 128;
inline constexpr std::uint64_t kGrantMsg = 128;
inline constexpr std::uint64_t kCensus = 64;
inline std::uint64_t journal_upload(std::size_t ops) { return 128 + 64 * ops; }
inline std::uint64_t reconcile_resp(std::size_t uploaded) { return 256 + 64 * uploaded; }
} // namespace msg_size

// Whole-cluster simulation: one kernel, one core site, one policy server per
// authority, one agent per node. Everything advances through kernel events,
// so a (scenario, seed) pair fully determines the trace.
class Simulation {
public:
    explicit Simulation(Scenario sc) : sc_(std::move(sc)), kernel_(sc_.seed) {
        check_scenario(sc_);
        cfg_ = sc_.config;
        geoms_ = sc_.region_geoms();
        build_authorities();
        build_tokens();
        build_links();
        build_nodes();
        schedule_topology_events();
        schedule_workload();
        kernel_.observe_links([this](LinkUid uid, LinkState st, SimTime) {
            on_link_change(uid, st);
        });
    }

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    // ---- orchestration -------------------------------------------------------

    MetricsReport run() {
        advance_to(sc_.duration);
        return finish();
    }

    void advance_to(SimTime t) { kernel_.run_until(t); }

    MetricsReport finish() {
        kernel_.finalize_run();
        audit_licensing();

        MetricsReport r;
        r.scenario = sc_.name;
        r.seed = sc_.seed;
        r.duration = sc_.duration;
        r.finished_at = kernel_.now();
        r.records = kernel_.trace().records();

        count_buffered(kernel_.counters());
        r.counters = kernel_.counters();

        r.amf_state_digest = digest_amf_state(central_.state());
        std::map<AuthorityId, std::map<GrantId, Grant>> tables;
        for (auto& [id, p] : policy_) {
            p.server.expire_grants(kernel_.now());
            tables[id] = p.server.active_grants();
        }
        r.grant_table_digest = digest_grant_tables(tables);

        for (const auto& [id, n] : nodes_) {
            NodeDigest d;
            d.node = id;
            d.mode = n.spec.deployment == DeploymentMode::Integrated
                         ? "integrated"
                         : n2_mode_name(n.mode.mode());
            d.lamport = n.lamport;
            d.journal_len = n.journal.size();
            d.buffered_packets = n.buffer.size() + (n.transfer ? 1 : 0);
            d.buffered_bytes = n.buffer.occupancy() + (n.transfer ? n.transfer->pkt.size : 0);
            d.region = n.region;
            d.radio_state = n.radio_state;
            r.nodes.push_back(std::move(d));
        }
        return r;
    }

    // ---- inspection (tests) ---------------------------------------------------

    struct CensusEntry {
        std::size_t ops = 0;
        SimTime at;
    };

    const Kernel& kernel() const { return kernel_; }
    const std::map<NodeId, CensusEntry>& census() const { return census_; }
    const TraceLog& trace() const { return kernel_.trace(); }
    const Counters& counters() const { return kernel_.counters(); }
    const CentralAmf& central() const { return central_; }
    const Scenario& scenario() const { return sc_; }

    const AmfState& local_state(NodeId n) const { return node(n).local; }
    N2Mode mode(NodeId n) const { return node(n).mode.mode(); }
    std::optional<BearerId> active_bearer(NodeId n, const std::string& vif) const {
        return vif == "n2" ? node(n).n2.active() : node(n).n3.active();
    }
    const PolicyServer& policy_server(const AuthorityId& a) const {
        return policy_.at(a).server;
    }
    const EntitlementToken& token(TokenId id) const { return tokens_.at(id); }

private:
    // ---- runtime state --------------------------------------------------------

    struct BearerRt {
        BearerSpec spec;
        LinkUid uid;
    };

    struct PendingRequest { // control request parked until the mode resolves
        SimTime requested_at;
        OpKind kind = OpKind::Register;
        std::string subject;
        std::map<std::string, std::string> params;
    };

    struct ForwardRt { // stop-and-wait forwarding of one op to the core
        ControlOp op;
        SimTime requested_at;
        std::uint32_t attempts = 0;
        std::optional<EventId> retry_ev;
        SimTime retry_at;
    };

    struct ProbeRt {
        BearerId bearer = 0;
        SimTime sent_at;
        EventId timeout_ev = 0;
        SimTime timeout_at;
        bool timed_out = false;
    };

    struct GrantReqRt {
        std::uint64_t req_id = 0;
        GrantRequest req;
        SimTime first_sent_at;
        SimTime sent_at;
        std::uint32_t attempt = 1;
        SimTime timeout; // doubles per retry
        EventId timeout_ev = 0;
        SimTime timeout_at;
    };

    struct TransferRt { // custody packet awaiting the next hop's ack
        std::uint64_t id = 0;
        UserPacket pkt;
        std::vector<NodeId> path; // remaining route, self first
        std::uint32_t attempts = 0;
        SimTime sent_at;
        EventId timeout_ev = 0;
        SimTime timeout_at;
    };

    struct NodeRt {
        NodeSpec spec;
        std::optional<EntitlementToken> token;
        double tx_power_dbm = 0.0;
        BandId radio_band = 0;

        std::int64_t region = -1;

        std::vector<BearerRt> bearers;
        VirtualInterface n2, n3;
        bool last_core_access = false;

        ModeMachine mode{true};
        N2Mode last_mode = N2Mode::Connected; // what `mode` most recently reported
        std::uint64_t lamport = 0;
        std::uint64_t next_seq = 0;
        Journal journal{};
        AmfState local;
        std::deque<PendingRequest> pending;
        std::deque<ForwardRt> forward_queue; // front is in flight
        bool forward_in_flight = false;

        bool reconcile_in_flight = false;
        SimTime reconcile_started;
        std::uint64_t reconcile_upload_hi = 0;
        std::optional<EventId> reconcile_retry_ev;
        SimTime reconcile_retry_at;

        PeerTable peers;
        std::optional<NodeId> gateway;

        DtnBuffer buffer;
        RouteCache routes;
        std::set<std::pair<NodeId, std::uint64_t>> rreq_seen;
        std::set<PacketId> pkts_seen;
        std::optional<std::uint64_t> discovery_seq;
        bool drain_scheduled = false;
        std::optional<TransferRt> transfer;
        std::map<NodeId, HealthStats> hop_health;

        std::vector<Grant> grants;
        std::optional<GrantReqRt> grant_req;
        std::uint64_t next_grant_req = 0;
        std::optional<SimTime> regrant_at; // pending retry-after-denial timer
        std::string radio_state;

        std::uint64_t next_probe = 1;
        std::map<std::uint64_t, ProbeRt> probes;
        std::optional<SimTime> recheck_at; // earliest pending selection re-check
    };

    struct PolicyRt {
        PolicyServer server;
        // Decision cache keyed by (node, request id): a retransmitted request
        // is answered with the original decision instead of being re-run.
        std::map<std::pair<NodeId, std::uint64_t>, GrantDecision> cache;
    };

    // ---- construction ---------------------------------------------------------

    void build_authorities() {
        GrantId base = 0;
        for (const auto& a : sc_.authorities) {
            PolicyRt rt;
            rt.server = PolicyServer(a.id, a.key);
            rt.server.set_grant_id_base(base);
            base += 1000000; // disjoint id range per authority
            policy_.emplace(a.id, std::move(rt));
            authority_keys_[a.id] = a.key;
        }
        for (const auto& r : sc_.regions) {
            policy_.at(r.geom.authority).server.add_profile(r.profile);
            region_authority_[r.geom.id] = r.geom.authority;
        }
        // Federation edges: each authority learns its peers' keys.
        for (const auto& a : sc_.authorities) {
            for (const auto& peer : a.federation) {
                policy_.at(a.id).server.federate(peer, authority_keys_.at(peer));
            }
        }
    }

    void build_tokens() {
        for (const auto& t : sc_.tokens) {
            tokens_.emplace(
                t.id, issue_token(t.issuer, authority_keys_.at(t.issuer), t.request, t.id));
        }
    }

    void build_links() {
        for (const auto& n : sc_.nodes) {
            for (const auto& b : n.bearers) {
                LinkModel m;
                m.base_latency = b.latency;
                m.jitter_bound = b.jitter;
                m.loss_prob = b.loss;
                m.bandwidth_bps = b.bandwidth_bps;
                m.state = b.initially_up ? LinkState::Up : LinkState::Down;
                kernel_.add_link(LinkUid::bearer(b.id), m);
                bearer_owner_[b.id] = n.id;
            }
            LinkModel reg;
            reg.base_latency = cfg_.regulatory_latency;
            reg.bandwidth_bps = static_cast<std::int64_t>(cfg_.regulatory_bandwidth_bps);
            kernel_.add_link(LinkUid::regulatory(n.id), reg);
        }
        LinkModel inter;
        inter.base_latency = cfg_.internode_latency;
        inter.bandwidth_bps = static_cast<std::int64_t>(cfg_.internode_bandwidth_bps);
        for (std::size_t i = 0; i < sc_.nodes.size(); ++i) {
            for (std::size_t j = i + 1; j < sc_.nodes.size(); ++j) {
                kernel_.add_link(LinkUid::internode(sc_.nodes[i].id, sc_.nodes[j].id), inter);
            }
        }
    }

    void build_nodes() {
        for (const auto& spec : sc_.nodes) {
            NodeRt& n = nodes_[spec.id];
            n.spec = spec;
            if (spec.token) {
                n.token = tokens_.at(*spec.token);
                n.radio_band = *n.token->bands.begin();
            }
            n.tx_power_dbm = spec.tx_power_dbm.value_or(n.token ? n.token->max_power_dbm : 0.0);

            std::vector<BearerId> order;
            for (const auto& b : spec.bearers) {
                n.bearers.push_back({b, LinkUid::bearer(b.id)});
                order.push_back(b.id);
            }
            n.n2 = VirtualInterface(spec.id, "n2", order);
            n.n3 = VirtualInterface(spec.id, "n3", order);

            auto up = [this](BearerId b) { return bearer_up(b); };
            n.n2.select(kernel_.now(), up, cfg_);
            n.n3.select(kernel_.now(), up, cfg_);

            n.mode = ModeMachine(n.n2.active().has_value());
            n.last_mode = n.mode.mode();
            n.journal = Journal(spec.id);
            n.buffer = DtnBuffer(cfg_.buffer_capacity_bytes);
            n.last_core_access = n.n3.active().has_value();

            GeoPoint p = position_at(spec.trace, kernel_.now());
            auto r = region_of(p, geoms_);
            n.region = r ? static_cast<std::int64_t>(*r) : -1;
        }

        // Kick off periodic machinery deterministically, in node-id order.
        for (auto& [id, n] : nodes_) {
            update_gateway(n);
            ensure_spectrum(n);
            schedule_beacon(id, kernel_.now());
            for (const auto& b : n.bearers) schedule_probe(id, b.spec.id, kernel_.now());
            if (n.spec.deployment == DeploymentMode::Integrated) {
                // Announce the (empty) local inventory as soon as we exist.
                kernel_.schedule(kernel_.now(), [this, id = id] { send_census(node_mut(id)); });
            }
            for (SimTime t : region_crossing_candidates(n.spec.trace, geoms_)) {
                if (t <= sc_.duration) {
                    kernel_.schedule(t, [this, id = id] { on_region_tick(node_mut(id)); });
                }
            }
        }
    }

    void schedule_topology_events() {
        for (const auto& e : sc_.topology_events) {
            kernel_.schedule(e.at, [this, e] {
                kernel_.set_link_state(LinkUid::bearer(e.bearer), e.state);
            });
        }
    }

    void schedule_workload() {
        for (const auto& w : sc_.workload) {
            if (w.kind == WorkloadKind::Control) {
                kernel_.schedule(w.at, [this, w] {
                    if (w.node == kCoreNode) {
                        central_control(w.op, w.subject, w.params);
                    } else {
                        serve_control(node_mut(w.node), w.op, w.subject, w.params, kernel_.now());
                    }
                });
            } else {
                for (std::uint32_t i = 0; i < w.count; ++i) {
                    SimTime at = w.at + SimTime::from_us(w.interval.us() * i);
                    if (at > sc_.duration) break;
                    kernel_.schedule(at, [this, w] {
                        send_packet(node_mut(w.node), w.session, w.size_bytes);
                    });
                }
            }
        }
    }

    // ---- node/link lookups ----------------------------------------------------

    NodeRt& node_mut(NodeId id) { return nodes_.at(id); }
    const NodeRt& node(NodeId id) const { return nodes_.at(id); }

    bool bearer_up(BearerId b) const {
        return kernel_.link_state(LinkUid::bearer(b)) == LinkState::Up;
    }

    GeoPoint position(const NodeRt& n) const {
        return position_at(n.spec.trace, kernel_.now());
    }

    std::vector<NodeId> neighbors_in_range(const NodeRt& n) const {
        std::vector<NodeId> out;
        GeoPoint self = position(n);
        for (const auto& [id, other] : nodes_) {
            if (id == n.spec.id) continue;
            if (distance(self, position(other)) <= cfg_.internode_range_m) out.push_back(id);
        }
        return out;
    }

    bool has_core_access(const NodeRt& n) const { return n.n3.active().has_value(); }

    // ---- radio gating ---------------------------------------------------------

    // The grant that authorizes transmitting here and now, if any.
    std::optional<Grant> covering_grant(const NodeRt& n) const {
        if (n.region < 0) return std::nullopt;
        for (const auto& g : n.grants) {
            if (g.band == n.radio_band && g.region == static_cast<RegionId>(n.region) &&
                g.window.contains(kernel_.now())) {
                return g;
            }
        }
        return std::nullopt;
    }

    // Puts one frame on the air to everyone in range. Without a covering
    // grant nothing is emitted at all — silence is the enforcement mechanism.
    // Returns true if energy left the antenna (even with zero receivers).
    bool radio_broadcast(NodeRt& n, MsgCategory cat, std::uint64_t size,
                         const std::function<void(NodeId)>& deliver_to) {
        auto g = covering_grant(n);
        if (!g) return false;
        emit_radio_tx(n, *g, cat);
        for (NodeId peer : neighbors_in_range(n)) {
            kernel_.transmit(LinkUid::internode(n.spec.id, peer), n.spec.id,
                             BearerRole::Internode, cat, size,
                             [deliver_to, peer] { deliver_to(peer); });
        }
        return true;
    }

    // One frame to one peer; no delivery if the peer has moved out of range
    // (the energy still goes out, which is what the licensing audit meters).
    bool radio_unicast(NodeRt& n, NodeId to, MsgCategory cat, std::uint64_t size,
                       Kernel::Callback on_deliver) {
        auto g = covering_grant(n);
        if (!g) return false;
        emit_radio_tx(n, *g, cat);
        GeoPoint self = position(n);
        auto it = nodes_.find(to);
        if (it == nodes_.end() || distance(self, position(it->second)) > cfg_.internode_range_m) {
            return true; // transmitted into the void
        }
        kernel_.transmit(LinkUid::internode(n.spec.id, to), n.spec.id, BearerRole::Internode,
                         cat, size, std::move(on_deliver));
        return true;
    }

    void emit_radio_tx(const NodeRt& n, const Grant& g, MsgCategory cat) {
        RadioTxRecord rec;
        rec.at = kernel_.now();
        rec.node = n.spec.id;
        rec.band = n.radio_band;
        rec.region = n.region;
        rec.power_dbm = n.tx_power_dbm;
        rec.grant = g.id;
        rec.category = cat;
        kernel_.trace().append(rec);
        ++kernel_.counters().radio_transmissions;
    }

    // ---- bearer selection / backhaul tracking -----------------------------------

    void on_link_change(LinkUid uid, LinkState) {
        if (uid.is_internode()) return;
        for (auto& [bid, owner] : bearer_owner_) {
            if (LinkUid::bearer(bid) == uid) {
                reselect(node_mut(owner));
                return;
            }
        }
    }

    void reselect(NodeRt& n) {
        auto up = [this](BearerId b) { return bearer_up(b); };
        for (VirtualInterface* vif : {&n.n2, &n.n3}) {
            SwitchDecision d = vif->select(kernel_.now(), up, cfg_);
            if (d.changed) {
                BearerSwitchRecord rec;
                rec.at = kernel_.now();
                rec.node = n.spec.id;
                rec.vif = vif->role();
                rec.from = d.from;
                rec.to = d.to;
                rec.to_link_up = d.to != 0 && bearer_up(d.to);
                kernel_.trace().append(rec);
                ++kernel_.counters().bearer_switches;
            }
        }

        // One pending hysteresis re-check per node, and only at a strictly
        // future instant: a clause that matured without producing a switch
        // can only become actionable after new probe evidence, and probe
        // handlers re-enter selection themselves.
        std::optional<SimTime> next;
        for (const VirtualInterface* vif : {&n.n2, &n.n3}) {
            if (auto t = vif->next_check_at(cfg_)) {
                if (!next || *t < *next) next = *t;
            }
        }
        if (next && *next > kernel_.now() &&
            (!n.recheck_at || *next < *n.recheck_at)) {
            n.recheck_at = *next;
            NodeId id = n.spec.id;
            SimTime at = *next;
            kernel_.schedule(at, [this, id, at] {
                NodeRt& m = node_mut(id);
                if (m.recheck_at && *m.recheck_at == at) m.recheck_at.reset();
                reselect(m);
            });
        }

        bool n2_up = n.n2.active().has_value();
        if (n.spec.deployment != DeploymentMode::Integrated) {
            if (auto m = n.mode.on_backhaul(n2_up, kernel_.now(), cfg_)) {
                apply_mode_change(n, *m);
            } else if (auto until = n.mode.loss_pending_until(cfg_)) {
                NodeId id = n.spec.id;
                kernel_.schedule(*until, [this, id] {
                    NodeRt& nn = node_mut(id);
                    if (auto m = nn.mode.check_hysteresis(kernel_.now(), cfg_)) {
                        apply_mode_change(nn, *m);
                    }
                });
            }
        }

        bool core = has_core_access(n);
        if (core != n.last_core_access) {
            n.last_core_access = core;
            notify_peers(n);
            update_gateway(n);
            if (core) kick_drain(n);
            // A self-governing node that just regained backhaul refreshes the
            // central inventory with whatever it decided while dark.
            if (core) send_census(n);
        }
        if (n2_up) {
            // Requests parked during a sub-hysteresis blip resume here.
            if (n.mode.mode() == N2Mode::Connected && !n.pending.empty()) serve_pending(n);
            pump_forward(n);
        }
    }

    // ---- mode machine consequences ----------------------------------------------

    void apply_mode_change(NodeRt& n, N2Mode to) {
        ModeTransitionRecord rec;
        rec.at = kernel_.now();
        rec.node = n.spec.id;
        rec.from = n2_mode_name(n.last_mode);
        rec.to = n2_mode_name(to);
        n.last_mode = to;
        kernel_.trace().append(rec);
        ++kernel_.counters().mode_transitions;

        switch (to) {
            case N2Mode::Isolated:
                abort_reconcile(n);
                fail_forwards_to_local(n);
                serve_pending(n);
                kick_drain(n);
                break;
            case N2Mode::Reconciling:
                start_reconcile(n);
                break;
            case N2Mode::Connected:
                serve_pending(n);
                pump_forward(n);
                kick_drain(n);
                break;
        }
    }

    // ---- control plane: node side --------------------------------------------------

    void serve_control(NodeRt& n, OpKind kind, const std::string& subject,
                       const std::map<std::string, std::string>& params, SimTime requested_at) {
        ++kernel_.counters().control_requests;
        if (n.spec.deployment == DeploymentMode::Integrated) {
            serve_local(n, kind, subject, params, requested_at, "integrated");
            send_census(n); // keep the central inventory current
            return;
        }
        switch (n.mode.mode()) {
            case N2Mode::Connected:
                if (n.n2.active()) {
                    enqueue_forward(n, kind, subject, params, requested_at);
                } else {
                    // Backhaul is dark but isolation has not been declared
                    // yet: hold the request so nothing touches the dead link.
                    n.pending.push_back({requested_at, kind, subject, params});
                }
                break;
            case N2Mode::Isolated:
                serve_local(n, kind, subject, params, requested_at, "isolated");
                break;
            case N2Mode::Reconciling:
                n.pending.push_back({requested_at, kind, subject, params});
                break;
        }
    }

    void serve_pending(NodeRt& n) {
        std::deque<PendingRequest> q;
        q.swap(n.pending);
        for (auto& p : q) serve_control(n, p.kind, p.subject, p.params, p.requested_at);
        // counted once at arrival; undo the re-count from re-entering serve_control
        kernel_.counters().control_requests -= q.size();
    }

    ControlOp make_op(NodeRt& n, OpKind kind, const std::string& subject,
                      const std::map<std::string, std::string>& params) {
        ControlOp op;
        op.id = {n.spec.id, ++n.next_seq};
        op.lamport = ++n.lamport;
        op.kind = kind;
        op.subject = subject;
        op.params = params;

        ControlOpRecord rec;
        rec.at = kernel_.now();
        rec.origin = n.spec.id;
        rec.seq = op.id.seq;
        rec.lamport = op.lamport;
        rec.kind = op_kind_name(kind);
        rec.subject = subject;
        rec.params = params;
        kernel_.trace().append(rec);
        return op;
    }

    void respond_control(NodeRt& n, const ControlOp& op, SimTime requested_at,
                         const std::string& mode_tag, bool accepted,
                         const std::string& reject_reason) {
        ControlResponseRecord rec;
        rec.requested_at = requested_at;
        rec.responded_at = kernel_.now();
        rec.node = n.spec.id;
        rec.seq = op.id.seq;
        rec.kind = op_kind_name(op.kind);
        rec.subject = op.subject;
        rec.served_mode = mode_tag;
        rec.accepted = accepted;
        rec.reject_reason = reject_reason;
        kernel_.trace().append(rec);
        if (accepted) ++kernel_.counters().control_served[mode_tag];
        else ++kernel_.counters().control_rejected;
    }

    void serve_local(NodeRt& n, OpKind kind, const std::string& subject,
                     const std::map<std::string, std::string>& params, SimTime requested_at,
                     const std::string& mode_tag) {
        ControlOp op = make_op(n, kind, subject, params);
        ApplyResult r = apply_op(n.local, op, n.spec.id);
        if (r.applied) n.journal.append(op);
        respond_control(n, op, requested_at, mode_tag, r.applied, r.reject_reason);
    }

    void enqueue_forward(NodeRt& n, OpKind kind, const std::string& subject,
                         const std::map<std::string, std::string>& params, SimTime requested_at) {
        ForwardRt f;
        f.op = make_op(n, kind, subject, params);
        f.requested_at = requested_at;
        n.forward_queue.push_back(std::move(f));
        pump_forward(n);
    }

    void pump_forward(NodeRt& n) {
        if (n.forward_in_flight || n.forward_queue.empty()) return;
        if (n.mode.mode() != N2Mode::Connected || !n.n2.active()) return;
        send_forward(n);
    }

    void send_forward(NodeRt& n) {
        ForwardRt& f = n.forward_queue.front();
        n.forward_in_flight = true;
        ++f.attempts;
        BearerId active = *n.n2.active();
        LinkUid uid = LinkUid::bearer(active);
        NodeId id = n.spec.id;
        ControlOp op = f.op;
        SimTime requested_at = f.requested_at;
        kernel_.transmit(uid, id, BearerRole::Backhaul, MsgCategory::ControlN2,
                         msg_size::kControlOp, [this, id, uid, op, requested_at] {
                             core_receive_op(id, uid, op, requested_at);
                         });
        // Retransmit on silence, paced by the bearer's adaptive timer. The
        // deadline is inclusive — once rttvar decays to zero on a constant
        // path, the reply lands exactly at now+rto, and it must still count
        // as on time — so the retry fires one tick later.
        SimTime rto = current_rto(n.n2.health(active), cfg_);
        f.retry_at = kernel_.now() + rto + SimTime::from_us(1);
        f.retry_ev = kernel_.schedule(f.retry_at, [this, id, seq = op.id.seq] {
            NodeRt& nn = node_mut(id);
            if (!nn.forward_in_flight || nn.forward_queue.empty()) return;
            if (nn.forward_queue.front().op.id.seq != seq) return;
            nn.forward_in_flight = false;
            nn.forward_queue.front().retry_ev.reset();
            pump_forward(nn); // re-sends if still CONNECTED with a live bearer
        });
    }

    // An op that was in the forward pipeline when isolation hit is served
    // locally instead; op-id dedup at reconcile absorbs the case where the
    // core had in fact applied it and only the response was lost.
    void fail_forwards_to_local(NodeRt& n) {
        std::deque<ForwardRt> q;
        q.swap(n.forward_queue);
        n.forward_in_flight = false;
        for (auto& f : q) {
            if (f.retry_ev) kernel_.cancel(*f.retry_ev, f.retry_at);
            ApplyResult r = apply_op(n.local, f.op, n.spec.id);
            if (r.applied) n.journal.append(f.op);
            respond_control(n, f.op, f.requested_at, "isolated", r.applied, r.reject_reason);
        }
    }

    // ---- control plane: core side ---------------------------------------------------

    void core_receive_op(NodeId from, LinkUid uid, const ControlOp& op, SimTime requested_at) {
        ApplyResult r = central_.apply_live(op, kernel_.now());
        bool accepted = r.applied || r.duplicate;
        std::string reason = r.reject_reason;
        std::uint64_t clock = central_.lamport();
        kernel_.transmit(uid, kCoreNode, BearerRole::Backhaul, MsgCategory::ControlN2,
                         msg_size::kControlResp,
                         [this, from, op, requested_at, accepted, reason, clock] {
                             node_receive_control_response(from, op, requested_at, accepted,
                                                           reason, clock);
                         });
    }

    void node_receive_control_response(NodeId id, const ControlOp& op, SimTime requested_at,
                                       bool accepted, const std::string& reason,
                                       std::uint64_t central_clock) {
        NodeRt& n = node_mut(id);
        n.lamport = std::max(n.lamport, central_clock);
        if (!n.forward_in_flight || n.forward_queue.empty() ||
            n.forward_queue.front().op.id != op.id) {
            return; // stale response; the op has already been resolved
        }
        ForwardRt f = std::move(n.forward_queue.front());
        n.forward_queue.pop_front();
        n.forward_in_flight = false;
        if (f.retry_ev) kernel_.cancel(*f.retry_ev, f.retry_at);
        if (accepted) apply_op(n.local, op, std::nullopt); // mirror the central result
        respond_control(n, op, requested_at, "connected", accepted, reason);
        pump_forward(n);
    }

    // Ops originated by the core itself (policy pushes and the like).
    void central_control(OpKind kind, const std::string& subject,
                         const std::map<std::string, std::string>& params) {
        ++kernel_.counters().control_requests;
        ControlOp op;
        op.id = {kCoreNode, ++central_seq_};
        op.lamport = central_.tick();
        op.kind = kind;
        op.subject = subject;
        op.params = params;

        ControlOpRecord rec;
        rec.at = kernel_.now();
        rec.origin = kCoreNode;
        rec.seq = op.id.seq;
        rec.lamport = op.lamport;
        rec.kind = op_kind_name(kind);
        rec.subject = subject;
        rec.params = params;
        kernel_.trace().append(rec);

        ApplyResult r = central_.apply_live(op, kernel_.now());
        ControlResponseRecord resp;
        resp.requested_at = kernel_.now();
        resp.responded_at = kernel_.now();
        resp.node = kCoreNode;
        resp.seq = op.id.seq;
        resp.kind = op_kind_name(kind);
        resp.subject = subject;
        resp.served_mode = "central";
        resp.accepted = r.applied;
        resp.reject_reason = r.reject_reason;
        kernel_.trace().append(resp);
        if (r.applied) ++kernel_.counters().control_served["central"];
        else ++kernel_.counters().control_rejected;
    }

    // ---- reconciliation ---------------------------------------------------------------

    void start_reconcile(NodeRt& n) {
        n.reconcile_in_flight = true;
        n.reconcile_started = kernel_.now();
        send_reconcile(n);
    }

    void send_reconcile(NodeRt& n) {
        if (!n.n2.active()) return; // the mode machine will pull us back to ISOLATED
        std::vector<ControlOp> ops = n.journal.entries();
        n.reconcile_upload_hi = ops.empty() ? 0 : ops.back().id.seq;
        SimTime diverged = n.mode.diverged_at();
        NodeId id = n.spec.id;
        LinkUid uid = LinkUid::bearer(*n.n2.active());
        kernel_.transmit(uid, id, BearerRole::Backhaul, MsgCategory::ControlN2,
                         msg_size::journal_upload(ops.size()),
                         [this, id, uid, ops, diverged] {
                             core_receive_reconcile(id, uid, ops, diverged);
                         });
        n.reconcile_retry_at = kernel_.now() + cfg_.reconcile_retry;
        n.reconcile_retry_ev = kernel_.schedule(n.reconcile_retry_at, [this, id] {
            NodeRt& nn = node_mut(id);
            if (!nn.reconcile_in_flight) return;
            nn.reconcile_retry_ev.reset();
            send_reconcile(nn); // the upload or its answer was lost; try again
        });
    }

    void core_receive_reconcile(NodeId from, LinkUid uid, const std::vector<ControlOp>& ops,
                                SimTime diverged_at) {
        ReconcileReport rep = central_.reconcile(ops, diverged_at, kernel_.now());
        AmfState snapshot = central_.state();
        std::uint64_t clock = central_.lamport();
        kernel_.transmit(uid, kCoreNode, BearerRole::Backhaul, MsgCategory::ControlN2,
                         msg_size::reconcile_resp(ops.size()),
                         [this, from, rep, snapshot, clock] {
                             node_receive_reconcile_response(from, rep, snapshot, clock);
                         });
    }

    void node_receive_reconcile_response(NodeId id, const ReconcileReport& rep,
                                         const AmfState& central_state,
                                         std::uint64_t central_clock) {
        NodeRt& n = node_mut(id);
        if (!n.reconcile_in_flight || n.mode.mode() != N2Mode::Reconciling) return;
        n.lamport = std::max(n.lamport, central_clock);
        if (n.reconcile_retry_ev) {
            kernel_.cancel(*n.reconcile_retry_ev, n.reconcile_retry_at);
            n.reconcile_retry_ev.reset();
        }
        n.reconcile_in_flight = false;

        // Adopting the central result IS the anchor hand-back: any session
        // parked on this node's local forwarding path moves in one step.
        for (const auto& [sid, local_sess] : n.local.sessions) {
            auto it = central_state.sessions.find(sid);
            if (it != central_state.sessions.end() && it->second.anchor != local_sess.anchor) {
                AnchorMigrationRecord rec;
                rec.at = kernel_.now();
                rec.node = id;
                rec.session = sid;
                rec.from = local_sess.anchor;
                rec.to = it->second.anchor;
                kernel_.trace().append(rec);
            }
        }
        n.local = central_state;
        n.journal.prune_through(n.reconcile_upload_hi);

        ReconcileRecord rec;
        rec.at = kernel_.now();
        rec.node = id;
        rec.uploaded = rep.uploaded;
        rec.applied = rep.applied;
        rec.rejected = rep.rejected;
        rec.duration = kernel_.now() - n.reconcile_started;
        kernel_.trace().append(rec);
        ++kernel_.counters().reconciles;
        kernel_.counters().reconcile_applied += rep.applied;
        kernel_.counters().reconcile_rejected += rep.rejected;

        if (auto m = n.mode.on_reconcile_complete()) apply_mode_change(n, *m);
    }

    void abort_reconcile(NodeRt& n) {
        if (n.reconcile_retry_ev) {
            kernel_.cancel(*n.reconcile_retry_ev, n.reconcile_retry_at);
            n.reconcile_retry_ev.reset();
        }
        n.reconcile_in_flight = false; // journal stays; same divergence resumes later
    }

    // ---- census (self-governing nodes) ------------------------------------------

    // A self-governing node never uploads its journal; the central core only
    // learns how many entries it holds. Fire-and-forget: a lost report is
    // corrected by the next one.
    void send_census(NodeRt& n) {
        if (n.spec.deployment != DeploymentMode::Integrated) return;
        if (!n.n2.active()) return;
        NodeId id = n.spec.id;
        std::uint64_t count = n.journal.size();
        LinkUid uid = LinkUid::bearer(*n.n2.active());
        kernel_.transmit(uid, id, BearerRole::Backhaul, MsgCategory::ControlN2,
                         msg_size::kCensus,
                         [this, id, count] { core_receive_census(id, count); });
    }

    void core_receive_census(NodeId from, std::uint64_t count) {
        census_[from] = {count, kernel_.now()};
        CensusRecord rec;
        rec.at = kernel_.now();
        rec.node = from;
        rec.sessions = count;
        kernel_.trace().append(rec);
        ++kernel_.counters().census_reports;
    }

    // ---- peer discovery -----------------------------------------------------------

    void schedule_beacon(NodeId id, SimTime at) {
        kernel_.schedule(at, [this, id] {
            NodeRt& n = node_mut(id);
            beacon_tick(n);
            schedule_beacon(id, kernel_.now() + cfg_.beacon_interval);
        });
    }

    void beacon_tick(NodeRt& n) {
        auto gone = n.peers.expire(kernel_.now(), cfg_.peer_ttl);
        if (!gone.empty()) {
            kernel_.counters().peers_expired += gone.size();
            for (NodeId dead : gone) invalidate_routes_via(n, dead);
            update_gateway(n);
        }
        broadcast_beacon(n, BeaconKind::Periodic);
    }

    void broadcast_beacon(NodeRt& n, BeaconKind kind) {
        Beacon b = make_beacon(kind, n.spec.id, kernel_.now(), has_core_access(n),
                               n.spec.key_id, sc_.keys);
        bool emitted = radio_broadcast(n, MsgCategory::PeerDiscovery, msg_size::kBeacon,
                                       [this, b](NodeId to) { peer_receive(node_mut(to), b); });
        if (emitted) ++kernel_.counters().beacons_sent;
    }

    // Core-access changes are pushed immediately instead of waiting for the
    // next heartbeat, so gateway choices track reality within one hop delay.
    void notify_peers(NodeRt& n) { broadcast_beacon(n, BeaconKind::ConnectivityChange); }

    void peer_receive(NodeRt& n, const Beacon& b) {
        PeerAuth auth = authenticate_peer(b, sc_.keys);
        if (auth != PeerAuth::Accepted) {
            ++kernel_.counters().beacons_rejected[peer_auth_name(auth)];
            return;
        }
        ++kernel_.counters().beacons_accepted;
        bool known = n.peers.contains(b.sender);
        bool had_access = known && n.peers.entries().at(b.sender).has_core_access;
        n.peers.upsert(b.sender, kernel_.now(), b.has_core_access);
        if (known && had_access && !b.has_core_access) {
            // Routes that drained through this peer are now dead ends.
            invalidate_routes_via(n, b.sender);
        }
        if (!known || had_access != b.has_core_access) update_gateway(n);
        if (!known || (!had_access && b.has_core_access)) kick_drain(n);
    }

    void update_gateway(NodeRt& n) {
        auto g = elect_gateway(n.peers, n.spec.id, has_core_access(n));
        if (g != n.gateway) {
            n.gateway = g;
            GatewayRecord rec;
            rec.at = kernel_.now();
            rec.node = n.spec.id;
            rec.gateway = g ? static_cast<std::int64_t>(*g) : -1;
            kernel_.trace().append(rec);
        }
    }

    void invalidate_routes_via(NodeRt& n, NodeId via) {
        if (auto r = n.routes.get(kCoreNode)) {
            bool uses = std::find(r->path.begin(), r->path.end(), via) != r->path.end();
            if (uses) {
                RouteEventRecord rec;
                rec.at = kernel_.now();
                rec.node = n.spec.id;
                rec.kind = "invalidated";
                rec.seq = r->seq;
                rec.path = r->path;
                kernel_.trace().append(rec);
            }
        }
        n.routes.invalidate_through(via);
    }

    // ---- user plane: ingress --------------------------------------------------------

    void send_packet(NodeRt& n, const std::string& session, std::uint64_t size) {
        UserPacket pkt;
        pkt.id = ++next_packet_;
        pkt.session = session;
        pkt.origin = n.spec.id;
        pkt.size = size;
        pkt.created = kernel_.now();
        pkt.ttl = cfg_.packet_ttl;
        pkt.hops = {n.spec.id};
        ++kernel_.counters().packets_sent;
        admit_packet(n, std::move(pkt));
        kick_drain(n);
    }

    void admit_packet(NodeRt& n, UserPacket pkt) {
        if (pkt.size > n.buffer.capacity()) {
            drop_packet(pkt, DropReason::Oversize);
            return;
        }
        AdmitResult r = n.buffer.admit(std::move(pkt));
        for (const auto& e : r.evicted) drop_packet(e, DropReason::Evicted);
    }

    void drop_packet(const UserPacket& pkt, DropReason why) {
        PacketOutcomeRecord rec;
        rec.at = kernel_.now();
        rec.pkt = pkt.id;
        rec.session = pkt.session;
        rec.origin = pkt.origin;
        rec.outcome = "dropped";
        rec.drop_reason = drop_reason_name(why);
        rec.latency = kernel_.now() - pkt.created;
        rec.hops = pkt.hops;
        kernel_.trace().append(rec);
        ++kernel_.counters().packets_dropped[drop_reason_name(why)];
    }

    // ---- user plane: store-and-forward drain ------------------------------------------

    void kick_drain(NodeRt& n) {
        if (n.drain_scheduled || n.transfer) return;
        drain_step(n);
    }

    void drain_step(NodeRt& n) {
        n.drain_scheduled = false;
        if (n.transfer) return; // resumes when the pending hop resolves

        while (!n.buffer.empty() && n.buffer.queue().front().expired(kernel_.now())) {
            drop_packet(n.buffer.pop_front(), DropReason::TtlExpired);
        }
        if (n.buffer.empty()) return;

        if (n.spec.deployment == DeploymentMode::Integrated) {
            // Terminates on the node's own user-plane function.
            deliver_packet(n.buffer.pop_front());
            schedule_drain(n, kernel_.now());
            return;
        }

        if (has_core_access(n)) {
            BearerId active = *n.n3.active();
            const BearerRt* brt = find_bearer(n, active);
            UserPacket pkt = n.buffer.pop_front();
            std::uint64_t size = pkt.size;
            NodeId id = n.spec.id;
            kernel_.transmit(
                brt->uid, id, BearerRole::Backhaul, MsgCategory::UserData, size,
                [this, pkt] { core_receive_packet(pkt); },
                [this, id, pkt](DropReason) {
                    // Pulled out of the air by a failing link: back in custody.
                    admit_packet(node_mut(id), pkt);
                });
            // Pace at the bearer's serialization rate so a long flush queue
            // drains at link speed instead of dumping instantaneously.
            schedule_drain(n, kernel_.now() + serialization_delay(size, brt->spec.bandwidth_bps));
            return;
        }

        if (auto route = n.routes.get(kCoreNode)) {
            begin_transfer(n, n.buffer.pop_front(), route->path);
            return;
        }
        maybe_discover(n);
    }

    void schedule_drain(NodeRt& n, SimTime at) {
        if (n.drain_scheduled) return;
        n.drain_scheduled = true;
        NodeId id = n.spec.id;
        kernel_.schedule(at, [this, id] { drain_step(node_mut(id)); });
    }

    void deliver_packet(const UserPacket& pkt) {
        if (!core_seen_.insert(pkt.id).second) {
            ++kernel_.counters().packets_duplicate_suppressed;
            return;
        }
        PacketOutcomeRecord rec;
        rec.at = kernel_.now();
        rec.pkt = pkt.id;
        rec.session = pkt.session;
        rec.origin = pkt.origin;
        rec.outcome = "delivered";
        rec.latency = kernel_.now() - pkt.created;
        rec.hops = pkt.hops;
        kernel_.trace().append(rec);
        ++kernel_.counters().packets_delivered;
    }

    void core_receive_packet(const UserPacket& pkt) { deliver_packet(pkt); }

    const BearerRt* find_bearer(const NodeRt& n, BearerId b) const {
        for (const auto& brt : n.bearers) {
            if (brt.spec.id == b) return &brt;
        }
        return nullptr;
    }

    // ---- user plane: relay hops --------------------------------------------------------

    void begin_transfer(NodeRt& n, UserPacket pkt, std::vector<NodeId> path) {
        // The cached route starts at this node; custody moves one hop at a time.
        auto self = std::find(path.begin(), path.end(), n.spec.id);
        if (self == path.end() || self + 1 == path.end()) {
            // Degenerate route; drop it and rediscover.
            n.routes.invalidate(kCoreNode);
            admit_packet(n, std::move(pkt));
            maybe_discover(n);
            return;
        }
        TransferRt t;
        t.id = ++next_transfer_;
        t.pkt = std::move(pkt);
        t.path.assign(self, path.end());
        n.transfer = std::move(t);
        send_transfer(n);
    }

    void send_transfer(NodeRt& n) {
        TransferRt& t = *n.transfer;
        ++t.attempts;
        if (t.attempts > 1 + cfg_.max_hop_retransmits) {
            hop_failed(n);
            return;
        }
        NodeId next = t.path[1];
        NodeId id = n.spec.id;
        std::uint64_t tid = t.id;
        UserPacket pkt = t.pkt;
        std::vector<NodeId> path = t.path;
        t.sent_at = kernel_.now();
        radio_unicast(n, next, MsgCategory::UserData, t.pkt.size,
                      [this, next, id, tid, pkt, path] {
                          relay_receive(node_mut(next), id, tid, pkt, path);
                      });
        // Inclusive deadline: an ack at exactly now+rto is on time.
        SimTime rto = current_rto(n.hop_health[next], cfg_);
        t.timeout_at = kernel_.now() + rto + SimTime::from_us(1);
        t.timeout_ev = kernel_.schedule(t.timeout_at, [this, id, tid] {
            NodeRt& nn = node_mut(id);
            if (!nn.transfer || nn.transfer->id != tid) return;
            nn.hop_health[nn.transfer->path[1]].record_loss(kernel_.now(), cfg_);
            send_transfer(nn); // unacked: try the same hop again
        });
    }

    void relay_receive(NodeRt& n, NodeId from, std::uint64_t transfer_id, UserPacket pkt,
                       const std::vector<NodeId>& path) {
        // Ack first — even duplicates — so the sender can release custody.
        radio_unicast(n, from, MsgCategory::UserData, msg_size::kHopAck,
                      [this, from, transfer_id] { transfer_acked(node_mut(from), transfer_id); });
        if (!n.pkts_seen.insert(pkt.id).second) {
            ++kernel_.counters().packets_duplicate_suppressed;
            return;
        }
        pkt.hops.push_back(n.spec.id);
        // Remember the tail of the path as this node's own route so custody
        // can keep moving without a fresh discovery.
        auto self = std::find(path.begin(), path.end(), n.spec.id);
        if (self != path.end() && self + 1 != path.end() && !n.routes.get(kCoreNode)) {
            Route r;
            r.dst = kCoreNode;
            r.path.assign(self, path.end());
            r.seq = n.routes.next_seq();
            r.established = kernel_.now();
            n.routes.put(std::move(r));
        }
        admit_packet(n, std::move(pkt));
        kick_drain(n);
    }

    void transfer_acked(NodeRt& n, std::uint64_t transfer_id) {
        if (!n.transfer || n.transfer->id != transfer_id) return;
        TransferRt t = std::move(*n.transfer);
        n.transfer.reset();
        kernel_.cancel(t.timeout_ev, t.timeout_at);
        n.hop_health[t.path[1]].record_rtt(kernel_.now() - t.sent_at, kernel_.now(), cfg_);
        drain_step(n);
    }

    void hop_failed(NodeRt& n) {
        TransferRt t = std::move(*n.transfer);
        n.transfer.reset();
        NodeId bad = t.path[1];
        ++kernel_.counters().route_errors;
        RouteEventRecord rec;
        rec.at = kernel_.now();
        rec.node = n.spec.id;
        rec.kind = "invalidated";
        rec.seq = n.routes.current_seq();
        rec.path = t.path;
        kernel_.trace().append(rec);
        n.routes.invalidate_through(bad);
        admit_packet(n, std::move(t.pkt)); // custody retained; rediscover and retry
        maybe_discover(n);
    }

    // ---- user plane: route discovery ------------------------------------------------------

    void maybe_discover(NodeRt& n) {
        if (n.discovery_seq || n.buffer.empty()) return;
        std::uint64_t seq = n.routes.next_seq();
        n.discovery_seq = seq;
        n.rreq_seen.insert({n.spec.id, seq});
        ++kernel_.counters().rreq_sent;
        std::vector<NodeId> path{n.spec.id};
        NodeId origin = n.spec.id;
        radio_broadcast(n, MsgCategory::RouteControl, msg_size::kRouteCtl,
                        [this, origin, seq, path](NodeId to) {
                            rreq_receive(node_mut(to), origin, seq, path);
                        });
        NodeId id = n.spec.id;
        kernel_.schedule_in(cfg_.rreq_timeout, [this, id, seq] {
            NodeRt& nn = node_mut(id);
            if (nn.discovery_seq != seq) return;
            nn.discovery_seq.reset();
            ++kernel_.counters().route_discovery_failures;
            RouteEventRecord rec;
            rec.at = kernel_.now();
            rec.node = id;
            rec.kind = "no_route";
            rec.seq = seq;
            kernel_.trace().append(rec);
        });
    }

    void rreq_receive(NodeRt& n, NodeId origin, std::uint64_t seq, std::vector<NodeId> path) {
        if (!n.rreq_seen.insert({origin, seq}).second) return; // flood dedup
        if (std::find(path.begin(), path.end(), n.spec.id) != path.end()) return;
        path.push_back(n.spec.id);
        if (has_core_access(n)) {
            ++kernel_.counters().rrep_sent;
            rrep_forward(n, origin, seq, path);
            return;
        }
        ++kernel_.counters().rreq_forwarded;
        radio_broadcast(n, MsgCategory::RouteControl, msg_size::kRouteCtl,
                        [this, origin, seq, path](NodeId to) {
                            rreq_receive(node_mut(to), origin, seq, path);
                        });
    }

    // Walks the reply back down the recorded path, one unicast per hop.
    void rrep_forward(NodeRt& n, NodeId origin, std::uint64_t seq,
                      const std::vector<NodeId>& path) {
        auto self = std::find(path.begin(), path.end(), n.spec.id);
        if (self == path.begin() || self == path.end()) return;
        NodeId prev = *(self - 1);
        radio_unicast(n, prev, MsgCategory::RouteControl, msg_size::kRouteCtl,
                      [this, prev, origin, seq, path] {
                          rrep_receive(node_mut(prev), origin, seq, path);
                      });
    }

    void rrep_receive(NodeRt& n, NodeId origin, std::uint64_t seq,
                      const std::vector<NodeId>& path) {
        // Every node on the way back learns its own suffix of the route.
        auto self = std::find(path.begin(), path.end(), n.spec.id);
        if (self != path.end() && self + 1 != path.end()) {
            auto existing = n.routes.get(kCoreNode);
            if (!existing || existing->seq < seq || n.spec.id == origin) {
                Route r;
                r.dst = kCoreNode;
                r.path.assign(self, path.end());
                r.seq = seq;
                r.established = kernel_.now();
                n.routes.put(std::move(r));
            }
        }
        if (n.spec.id == origin) {
            if (n.discovery_seq == seq) {
                n.discovery_seq.reset();
                ++kernel_.counters().routes_established;
                RouteEventRecord rec;
                rec.at = kernel_.now();
                rec.node = n.spec.id;
                rec.kind = "established";
                rec.seq = seq;
                rec.path = path;
                kernel_.trace().append(rec);
            }
            kick_drain(n);
            return;
        }
        rrep_forward(n, origin, seq, path);
    }

    // ---- transport probes --------------------------------------------------------------

    void schedule_probe(NodeId id, BearerId bearer, SimTime at) {
        kernel_.schedule(at, [this, id, bearer] {
            NodeRt& n = node_mut(id);
            probe_tick(n, bearer);
            schedule_probe(id, bearer, kernel_.now() + cfg_.probe_interval);
        });
    }

    void probe_tick(NodeRt& n, BearerId bearer) {
        if (!bearer_up(bearer)) return; // nothing useful to learn from a dead link
        const BearerRt* brt = find_bearer(n, bearer);
        std::uint64_t pid = n.next_probe++;
        NodeId id = n.spec.id;
        LinkUid uid = brt->uid;
        kernel_.transmit(uid, id, BearerRole::Backhaul, MsgCategory::TransportProbe,
                         msg_size::kProbe, [this, id, uid, pid] {
                             // Echo turnaround at the core.
                             kernel_.transmit(uid, kCoreNode, BearerRole::Backhaul,
                                              MsgCategory::TransportProbe, msg_size::kProbe,
                                              [this, id, pid] { probe_echo(node_mut(id), pid); });
                         });
        ProbeRt p;
        p.bearer = bearer;
        p.sent_at = kernel_.now();
        // Adaptive wait: a slow-but-working bearer should not be branded
        // lossy just because its round trip exceeds the static floor. The
        // deadline is inclusive — an echo landing exactly at now+wait (the
        // steady state once rttvar decays to zero) is on time — so the
        // loss verdict fires one tick after it.
        SimTime wait = std::max(cfg_.probe_timeout, current_rto(n.n2.health(bearer), cfg_));
        p.timeout_at = kernel_.now() + wait + SimTime::from_us(1);
        p.timeout_ev = kernel_.schedule(p.timeout_at, [this, id, pid] {
            probe_timeout(node_mut(id), pid);
        });
        n.probes.emplace(pid, p);
    }

    void probe_timeout(NodeRt& n, std::uint64_t pid) {
        auto it = n.probes.find(pid);
        if (it == n.probes.end() || it->second.timed_out) return;
        it->second.timed_out = true;
        BearerId b = it->second.bearer;
        n.n2.record_loss(b, kernel_.now(), cfg_);
        n.n3.record_loss(b, kernel_.now(), cfg_);
        reselect(n);
    }

    void probe_echo(NodeRt& n, std::uint64_t pid) {
        auto it = n.probes.find(pid);
        if (it == n.probes.end()) return;
        ProbeRt p = it->second;
        n.probes.erase(it);
        if (!p.timed_out) kernel_.cancel(p.timeout_ev, p.timeout_at);
        // A late echo still teaches the estimator the true round trip, which
        // is how a long-latency bearer earns a timeout it can actually meet.
        SimTime sample = kernel_.now() - p.sent_at;
        n.n2.record_rtt(p.bearer, sample, kernel_.now(), cfg_);
        n.n3.record_rtt(p.bearer, sample, kernel_.now(), cfg_);
        reselect(n);
    }

    // ---- spectrum client ------------------------------------------------------------------

    void on_region_tick(NodeRt& n) {
        auto r = region_of(position(n), geoms_);
        std::int64_t now_region = r ? static_cast<std::int64_t>(*r) : -1;
        if (now_region == n.region) return;
        RegionChangeRecord rec;
        rec.at = kernel_.now();
        rec.node = n.spec.id;
        rec.from = n.region;
        rec.to = now_region;
        kernel_.trace().append(rec);
        n.region = now_region;
        // The old request/grant no longer fits where the node stands.
        if (n.grant_req) clear_grant_request(n);
        n.regrant_at.reset();
        ensure_spectrum(n);
    }

    void clear_grant_request(NodeRt& n) {
        if (n.grant_req) {
            kernel_.cancel(n.grant_req->timeout_ev, n.grant_req->timeout_at);
            n.grant_req.reset();
        }
    }

    // Central entry point: works out whether the node may transmit where it
    // is, records the state, and starts a grant request when one is needed.
    void ensure_spectrum(NodeRt& n) {
        prune_grants(n);
        if (covering_grant(n)) {
            set_radio_state(n, "granted");
            return;
        }
        if (!n.token || n.region < 0) {
            set_radio_state(n, "silent");
            return;
        }
        if (n.grant_req) {
            set_radio_state(n, "pending");
            return;
        }
        if (n.regrant_at) {
            set_radio_state(n, "silent"); // denied recently; retry timer is running
            return;
        }
        send_grant_request(n);
    }

    void prune_grants(NodeRt& n) {
        std::erase_if(n.grants, [&](const Grant& g) {
            if (g.window.end > kernel_.now()) return false;
            GrantEventRecord rec;
            rec.at = kernel_.now();
            rec.kind = "expired";
            rec.grant = g.id;
            rec.authority = region_authority_.count(g.region) ? region_authority_.at(g.region)
                                                              : AuthorityId{};
            rec.node = n.spec.id;
            rec.band = g.band;
            rec.region = g.region;
            rec.window_start = g.window.start;
            rec.window_end = g.window.end;
            rec.power_cap_dbm = g.power_cap_dbm;
            kernel_.trace().append(rec);
            ++kernel_.counters().grants_expired;
            return true;
        });
    }

    void set_radio_state(NodeRt& n, const std::string& state) {
        if (n.radio_state == state) return;
        n.radio_state = state;
        RadioStateRecord rec;
        rec.at = kernel_.now();
        rec.node = n.spec.id;
        rec.region = n.region;
        rec.state = state;
        kernel_.trace().append(rec);
    }

    void send_grant_request(NodeRt& n) {
        auto region = static_cast<RegionId>(n.region);
        const AuthorityId& authority = region_authority_.at(region);
        SimTime start = kernel_.now();
        SimTime end = start + cfg_.max_grant_duration;
        if (end > n.token->not_after) end = n.token->not_after;
        if (end <= start) {
            set_radio_state(n, "silent"); // entitlement exhausted
            return;
        }
        GrantReqRt rq;
        rq.req_id = ++n.next_grant_req;
        rq.req = GrantRequest{*n.token, n.spec.id, n.radio_band, region,
                              TimeWindow{start, end}, n.tx_power_dbm};
        rq.first_sent_at = kernel_.now();
        rq.timeout = cfg_.grant_request_timeout;
        n.grant_req = rq;
        ++kernel_.counters().spectrum_requests;
        transmit_grant_request(n, authority);
        set_radio_state(n, "pending");
    }

    void transmit_grant_request(NodeRt& n, const AuthorityId& authority) {
        GrantReqRt& rq = *n.grant_req;
        rq.sent_at = kernel_.now();
        NodeId id = n.spec.id;
        std::uint64_t req_id = rq.req_id;
        GrantRequest req = rq.req;
        kernel_.transmit(LinkUid::regulatory(id), id, BearerRole::Regulatory,
                         MsgCategory::Spectrum, msg_size::kGrantMsg,
                         [this, id, authority, req_id, req] {
                             policy_receive(authority, id, req_id, req);
                         });
        rq.timeout_at = kernel_.now() + rq.timeout;
        rq.timeout_ev = kernel_.schedule(rq.timeout_at, [this, id, req_id, authority] {
            grant_timeout(node_mut(id), req_id, authority);
        });
    }

    void policy_receive(const AuthorityId& authority, NodeId from, std::uint64_t req_id,
                        const GrantRequest& req) {
        PolicyRt& p = policy_.at(authority);
        auto key = std::pair{from, req_id};
        auto cached = p.cache.find(key);
        GrantDecision d;
        if (cached != p.cache.end()) {
            d = cached->second; // duplicate of a request we already decided
        } else {
            d = p.server.request_grant(req, kernel_.now(), cfg_);
            p.cache.emplace(key, d);
        }
        kernel_.transmit(LinkUid::regulatory(from), kCoreNode, BearerRole::Regulatory,
                         MsgCategory::Spectrum, msg_size::kGrantMsg,
                         [this, from, req_id, authority, d] {
                             grant_response(node_mut(from), req_id, authority, d);
                         });
    }

    void grant_response(NodeRt& n, std::uint64_t req_id, const AuthorityId& authority,
                        const GrantDecision& d) {
        if (!n.grant_req || n.grant_req->req_id != req_id) return; // stale
        GrantReqRt rq = *n.grant_req;
        clear_grant_request(n);

        SpectrumDecisionRecord rec;
        rec.at = kernel_.now();
        rec.node = n.spec.id;
        rec.region = rq.req.region;
        rec.band = rq.req.band;
        rec.decision = d.granted ? "grant" : "denial";
        rec.reason = d.granted ? "" : denial_reason_name(d.reason);
        rec.latency = kernel_.now() - rq.first_sent_at;
        rec.grant = d.granted ? d.grant.id : 0;
        kernel_.trace().append(rec);

        if (d.granted) {
            ++kernel_.counters().grants_issued;
            n.grants.push_back(d.grant);
            GrantEventRecord ev;
            ev.at = kernel_.now();
            ev.kind = "activated";
            ev.grant = d.grant.id;
            ev.authority = authority;
            ev.node = n.spec.id;
            ev.band = d.grant.band;
            ev.region = d.grant.region;
            ev.window_start = d.grant.window.start;
            ev.window_end = d.grant.window.end;
            ev.power_cap_dbm = d.grant.power_cap_dbm;
            kernel_.trace().append(ev);

            NodeId id = n.spec.id;
            // Renew shortly before expiry, and re-evaluate exactly at expiry
            // so a lapsed license turns the radio off on time.
            SimTime renew_at = d.grant.window.end - cfg_.grant_renew_lead;
            if (renew_at > kernel_.now()) {
                kernel_.schedule(renew_at, [this, id, g = d.grant] { renew_grant(node_mut(id), g); });
            }
            kernel_.schedule(d.grant.window.end, [this, id] {
                ensure_spectrum(node_mut(id));
            });
            ensure_spectrum(n);
        } else {
            ++kernel_.counters().denials[denial_reason_name(d.reason)];
            schedule_regrant(n);
            ensure_spectrum(n);
        }
    }

    void renew_grant(NodeRt& n, const Grant& g) {
        if (n.grant_req || n.regrant_at) return;
        if (n.region != static_cast<std::int64_t>(g.region)) return; // moved on; crossing logic owns it
        bool still_held = std::any_of(n.grants.begin(), n.grants.end(),
                                      [&](const Grant& h) { return h.id == g.id; });
        if (!still_held) return;
        // Seamless extension: the fresh window starts where the old one ends.
        SimTime start = g.window.end;
        SimTime end = start + cfg_.max_grant_duration;
        if (end > n.token->not_after) end = n.token->not_after;
        if (end <= start) return;
        GrantReqRt rq;
        rq.req_id = ++n.next_grant_req;
        rq.req = GrantRequest{*n.token, n.spec.id, g.band, g.region, TimeWindow{start, end},
                              n.tx_power_dbm};
        rq.first_sent_at = kernel_.now();
        rq.timeout = cfg_.grant_request_timeout;
        n.grant_req = rq;
        ++kernel_.counters().spectrum_requests;
        transmit_grant_request(n, region_authority_.at(g.region));
    }

    void grant_timeout(NodeRt& n, std::uint64_t req_id, const AuthorityId& authority) {
        if (!n.grant_req || n.grant_req->req_id != req_id) return;
        GrantReqRt& rq = *n.grant_req;
        if (rq.attempt >= cfg_.grant_max_retries) {
            GrantReqRt done = rq;
            n.grant_req.reset();
            SpectrumDecisionRecord rec;
            rec.at = kernel_.now();
            rec.node = n.spec.id;
            rec.region = done.req.region;
            rec.band = done.req.band;
            rec.decision = "denial";
            rec.reason = denial_reason_name(DenialReason::Timeout);
            rec.latency = kernel_.now() - done.first_sent_at;
            kernel_.trace().append(rec);
            ++kernel_.counters().denials[denial_reason_name(DenialReason::Timeout)];
            schedule_regrant(n);
            ensure_spectrum(n);
            return;
        }
        ++rq.attempt;
        rq.timeout = rq.timeout + rq.timeout; // exponential backoff
        ++kernel_.counters().spectrum_requests;
        transmit_grant_request(n, authority);
    }

    void schedule_regrant(NodeRt& n) {
        SimTime at = kernel_.now() + cfg_.regrant_retry_interval;
        n.regrant_at = at;
        NodeId id = n.spec.id;
        kernel_.schedule(at, [this, id, at] {
            NodeRt& nn = node_mut(id);
            if (nn.regrant_at != at) return; // superseded by a crossing or grant
            nn.regrant_at.reset();
            ensure_spectrum(nn);
        });
    }

    // ---- end-of-run accounting -----------------------------------------------------------

    void count_buffered(Counters& c) const {
        std::set<PacketId> held;
        for (const auto& [id, n] : nodes_) {
            for (const auto& p : n.buffer.queue()) held.insert(p.id);
            if (n.transfer) held.insert(n.transfer->pkt.id);
        }
        std::uint64_t buffered = 0;
        for (PacketId id : held) {
            if (!core_seen_.count(id)) ++buffered;
        }
        c.packets_buffered_at_end = buffered;
    }

    // Every radio emission must point at a grant that was activated for this
    // node, band, and region with a window containing the send instant.
    void audit_licensing() {
        auto found = find_unlicensed_transmissions(kernel_.trace().records());
        for (const auto& v : found) kernel_.trace().append(v);
        kernel_.counters().licensing_violations += found.size();
    }

    // ---- members ---------------------------------------------------------------------------

    Scenario sc_;
    SimConfig cfg_;
    std::vector<Region> geoms_;
    Kernel kernel_;

    std::map<NodeId, NodeRt> nodes_;
    std::map<AuthorityId, PolicyRt> policy_;
    std::map<AuthorityId, MacKey> authority_keys_;
    std::map<RegionId, AuthorityId> region_authority_;
    std::map<TokenId, EntitlementToken> tokens_;
    std::map<BearerId, NodeId> bearer_owner_;

    CentralAmf central_;
    std::uint64_t central_seq_ = 0;
    std::map<NodeId, CensusEntry> census_;
    std::set<PacketId> core_seen_;

    PacketId next_packet_ = 0;
    std::uint64_t next_transfer_ = 0;
};

} // namespace nomadsim
