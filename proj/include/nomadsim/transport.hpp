#pragma once

#include "nomadsim/config.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/time.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nomadsim {

// Per-bearer link health. The RTT estimator runs entirely in integer
// microseconds with rational gains, so any reimplementation over the same
// sample sequence reproduces it bit for bit:
//   rttvar' = ((bd-bn)*rttvar + bn*|sample - srtt|) / bd   (old srtt)
//   srtt'   = ((ad-an)*srtt   + an*sample) / ad
// The first sample seeds srtt = sample, rttvar = sample/2.
struct HealthStats {
    SimTime srtt;
    SimTime rttvar;
    bool has_sample = false;
    std::deque<bool> window; // probe outcomes, true = lost, newest at back
    std::uint32_t window_lost = 0;
    SimTime last_probe;

    void record_rtt(SimTime sample, SimTime now, const SimConfig& cfg) {
        if (!has_sample) {
            srtt = sample;
            rttvar = SimTime::from_us(sample.us() / 2);
            has_sample = true;
        } else {
            std::int64_t dev = sample.us() - srtt.us();
            if (dev < 0) dev = -dev;
            std::int64_t bn = cfg.ewma_beta_num, bd = cfg.ewma_beta_den;
            std::int64_t an = cfg.ewma_alpha_num, ad = cfg.ewma_alpha_den;
            rttvar = SimTime::from_us(((bd - bn) * rttvar.us() + bn * dev) / bd);
            srtt = SimTime::from_us(((ad - an) * srtt.us() + an * sample.us()) / ad);
        }
        push_outcome(false, cfg);
        last_probe = now;
    }

    void record_loss(SimTime now, const SimConfig& cfg) {
        push_outcome(true, cfg);
        last_probe = now;
    }

    // Loss fraction is kept as the exact rational lost/size; callers compare
    // against thresholds by cross-multiplying so no float creeps in.
    std::uint32_t window_size() const { return static_cast<std::uint32_t>(window.size()); }

    // loss_window < 0.5, the health gate for bearer candidacy. An empty
    // window (no probes yet) counts as healthy: no evidence against it.
    bool healthy() const {
        return window.empty() || 2 * window_lost < window_size();
    }

private:
    void push_outcome(bool lost, const SimConfig& cfg) {
        window.push_back(lost);
        if (lost) ++window_lost;
        while (window.size() > cfg.loss_window_len) {
            if (window.front()) --window_lost;
            window.pop_front();
        }
    }
};

enum class AckMode { PerPacket, Cumulative };

inline const char* ack_mode_name(AckMode m) {
    return m == AckMode::PerPacket ? "per_packet" : "cumulative";
}

struct AdaptiveParams {
    SimTime rto;
    std::uint32_t flow_window = 0;
    AckMode ack_mode = AckMode::Cumulative;
};

// rto = clamp(srtt + 4*rttvar); flow_window = max(1, floor(base*(1-loss)));
// per-packet acks once loss exceeds 20% (5*lost > size, exact).
inline AdaptiveParams adapt_params(const HealthStats& h, const SimConfig& cfg) {
    if (!h.has_sample) {
        throw SimError(ErrorCode::NoSamples, "adapt_params before any rtt sample");
    }
    AdaptiveParams p;
    p.rto = SimTime::from_us(
        std::clamp(h.srtt.us() + 4 * h.rttvar.us(), cfg.rto_min.us(), cfg.rto_max.us()));
    std::uint64_t size = h.window_size();
    if (size == 0) {
        p.flow_window = cfg.base_window;
        p.ack_mode = AckMode::Cumulative;
    } else {
        std::uint64_t kept = cfg.base_window * (size - h.window_lost) / size;
        p.flow_window = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, kept));
        p.ack_mode = (5ull * h.window_lost > size) ? AckMode::PerPacket : AckMode::Cumulative;
    }
    return p;
}

// Current rto for a bearer, falling back to the configured initial value
// until the first sample lands.
inline SimTime current_rto(const HealthStats& h, const SimConfig& cfg) {
    if (!h.has_sample) return cfg.rto_initial;
    return adapt_params(h, cfg).rto;
}

struct SwitchDecision {
    bool changed = false;
    BearerId from = 0; // 0: none
    BearerId to = 0;   // 0: none
};

// One virtual interface (control- or user-plane role) multiplexing a
// priority-ordered list of physical bearers. Selection policy:
//   * candidate = bound, link UP, healthy (loss < 0.5 over the window)
//   * a DOWN active bearer is abandoned immediately — the active bearer is
//     never left pointing at a dead link
//   * an UP-but-unhealthy active is abandoned only after it has been out of
//     the candidate set continuously for `switch_hysteresis`
//   * upgrading to a higher-priority bearer requires that bearer to have
//     been continuously a candidate for `switch_hysteresis`
//   * with no candidates at all, a still-UP active is retained (degraded
//     service beats none); otherwise the interface goes inactive
// The two hysteresis clauses are what cap switching at 2 per outage: one
// failover when the preferred bearer dies, one upgrade once it has proven
// itself stable again.
class VirtualInterface {
public:
    VirtualInterface() = default;
    VirtualInterface(NodeId owner, std::string role, std::vector<BearerId> priority_order)
        : owner_(owner), role_(std::move(role)), bound_(std::move(priority_order)) {
        for (BearerId b : bound_) state_.emplace(b, PerBearer{});
    }

    NodeId owner() const { return owner_; }
    const std::string& role() const { return role_; }
    const std::vector<BearerId>& bound() const { return bound_; }
    std::optional<BearerId> active() const { return active_; }

    bool is_bound(BearerId b) const { return state_.count(b) > 0; }

    HealthStats& health(BearerId b) { return find_bearer(b).health; }
    const HealthStats& health(BearerId b) const { return find_bearer(b).health; }

    void record_rtt(BearerId b, SimTime sample, SimTime now, const SimConfig& cfg) {
        health(b).record_rtt(sample, now, cfg);
    }
    void record_loss(BearerId b, SimTime now, const SimConfig& cfg) {
        health(b).record_loss(now, cfg);
    }

    // Re-evaluates the active bearer. `up` reports current link state; the
    // caller re-invokes selection whenever link state or health changes and
    // at the instant returned by next_check_at().
    SwitchDecision select(SimTime now, const std::function<bool(BearerId)>& up,
                          const SimConfig& cfg) {
        // Refresh candidacy clocks first: "continuously a candidate since t"
        // is exact because candidacy only changes inside these calls.
        for (BearerId b : bound_) {
            PerBearer& pb = state_.at(b);
            bool cand = up(b) && pb.health.healthy();
            if (cand && !pb.candidate_since) pb.candidate_since = now;
            if (!cand) pb.candidate_since.reset();
        }

        std::optional<BearerId> best; // highest-priority candidate
        for (BearerId b : bound_) {
            if (state_.at(b).candidate_since) { best = b; break; }
        }

        SwitchDecision d;
        d.from = active_.value_or(0);

        if (active_) {
            BearerId a = *active_;
            if (!up(a)) {
                // Hard failure: leave now, with or without a replacement.
                active_ = best;
                active_uncandidate_since_.reset();
            } else if (!state_.at(a).candidate_since) {
                // Degraded but alive: only abandon after the hysteresis
                // window, and only when somewhere better exists.
                if (!active_uncandidate_since_) active_uncandidate_since_ = now;
                if (best && now - *active_uncandidate_since_ >= cfg.switch_hysteresis) {
                    active_ = best;
                    active_uncandidate_since_.reset();
                }
            } else {
                active_uncandidate_since_.reset();
                if (best && *best != a && rank(*best) < rank(a) &&
                    now - *state_.at(*best).candidate_since >= cfg.switch_hysteresis) {
                    active_ = best;
                }
            }
        } else {
            active_ = best; // nothing to flap away from: take the best now
        }

        d.to = active_.value_or(0);
        d.changed = d.to != d.from;
        return d;
    }

    // Earliest future instant at which a pending hysteresis clause could
    // mature, so the driver can schedule the re-check exactly.
    std::optional<SimTime> next_check_at(const SimConfig& cfg) const {
        std::optional<SimTime> at;
        auto consider = [&](SimTime t) {
            if (!at || t < *at) at = t;
        };
        if (active_uncandidate_since_) {
            consider(*active_uncandidate_since_ + cfg.switch_hysteresis);
        }
        if (active_) {
            for (BearerId b : bound_) {
                if (b == *active_) break; // only higher-priority bearers matter
                const PerBearer& pb = state_.at(b);
                if (pb.candidate_since) consider(*pb.candidate_since + cfg.switch_hysteresis);
            }
        }
        return at;
    }

private:
    struct PerBearer {
        HealthStats health;
        std::optional<SimTime> candidate_since;
    };

    const PerBearer& find_bearer(BearerId b) const {
        auto it = state_.find(b);
        if (it == state_.end()) {
            throw SimError(ErrorCode::UnboundBearer,
                           role_ + " vif: bearer " + std::to_string(b) + " not bound");
        }
        return it->second;
    }
    PerBearer& find_bearer(BearerId b) {
        return const_cast<PerBearer&>(std::as_const(*this).find_bearer(b));
    }

    std::size_t rank(BearerId b) const {
        for (std::size_t i = 0; i < bound_.size(); ++i) {
            if (bound_[i] == b) return i;
        }
        return bound_.size();
    }

    NodeId owner_ = 0;
    std::string role_;
    std::vector<BearerId> bound_; // priority order, index 0 preferred
    std::map<BearerId, PerBearer> state_;
    std::optional<BearerId> active_;
    std::optional<SimTime> active_uncandidate_since_;
};

} // namespace nomadsim
