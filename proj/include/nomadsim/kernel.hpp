#pragma once

#include "nomadsim/bytes.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/link.hpp"
#include "nomadsim/rng.hpp"
#include "nomadsim/time.hpp"
#include "nomadsim/trace.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace nomadsim {

// Discrete-event scheduler with an integer-microsecond clock. Events fire in
// (time, schedule-order) order, so two runs that schedule the same work get
// byte-identical traces. All randomness is drawn from per-link substreams
// derived from the run seed; the kernel itself never consumes entropy.
class Kernel {
public:
    using Callback = std::function<void()>;
    using LinkObserver = std::function<void(LinkUid, LinkState, SimTime)>;

    explicit Kernel(std::uint64_t run_seed) : seed_(run_seed) {}

    SimTime now() const { return now_; }
    std::uint64_t seed() const { return seed_; }

    TraceLog& trace() { return trace_; }
    const TraceLog& trace() const { return trace_; }
    Counters& counters() { return counters_; }
    const Counters& counters() const { return counters_; }

    // ---- scheduling --------------------------------------------------------

    EventId schedule(SimTime at, Callback fn) {
        if (at < now_) {
            throw SimError(ErrorCode::PastTime,
                           "schedule at " + std::to_string(at.us()) +
                               "us before now " + std::to_string(now_.us()) + "us");
        }
        EventId id = next_event_id_++;
        queue_.emplace(Key{at, id}, std::move(fn));
        return id;
    }

    EventId schedule_in(SimTime delay, Callback fn) {
        return schedule(now_ + delay, std::move(fn));
    }

    // Cancels a pending event; returns false if it already fired or was
    // cancelled. Cancellation is O(log n) via full-key lookup.
    bool cancel(EventId id, SimTime at) {
        return queue_.erase(Key{at, id}) > 0;
    }

    // Runs every event with timestamp <= limit, then advances the clock to
    // limit so follow-up scheduling starts from the horizon.
    void run_until(SimTime limit) {
        while (!queue_.empty() && queue_.begin()->first.first <= limit) {
            auto node = queue_.extract(queue_.begin());
            now_ = node.key().first;
            ++counters_.events_processed;
            node.mapped()();
        }
        if (limit > now_) now_ = limit;
    }

    bool idle() const { return queue_.empty(); }

    // ---- links -------------------------------------------------------------

    void add_link(LinkUid uid, LinkModel model) {
        links_.emplace(uid, LinkEntry{model, Rng(derive_stream(seed_, stream_tag::kLink, uid.value)), {}});
    }

    bool has_link(LinkUid uid) const { return links_.count(uid) > 0; }

    const LinkModel& link(LinkUid uid) const { return entry(uid).model; }

    LinkState link_state(LinkUid uid) const { return entry(uid).model.state; }

    void observe_links(LinkObserver fn) { observers_.push_back(std::move(fn)); }

    // Transitions a link. Taking a link down kills every delivery still in the
    // air on it. Re-asserting the current state is a counted no-op, not an
    // error: flap schedules in scenarios may legitimately overlap.
    void set_link_state(LinkUid uid, LinkState state) {
        LinkEntry& e = entry_mut(uid);
        if (e.model.state == state) {
            if (state == LinkState::Up) ++counters_.warning_linkup_noop;
            else ++counters_.warning_linkdown_noop;
            return;
        }
        e.model.state = state;
        if (state == LinkState::Down) drop_in_flight(e, DropReason::LinkDown);
        for (const auto& fn : observers_) fn(uid, state, now_);
    }

    // ---- transmission ------------------------------------------------------

    // Sends `size_bytes` over `uid`. On a live link the loss coin is tossed
    // first; survivors are delayed by base latency + uniform jitter +
    // serialization time and delivered via `on_deliver`. If the delivery is
    // later cancelled (link goes down, run ends) the trace record is
    // finalized in place and `on_drop` — when given — hears about it, so
    // senders can re-queue payloads instead of leaking them.
    DeliveryOutcome transmit(LinkUid uid,
                             NodeId sender,
                             BearerRole role,
                             MsgCategory category,
                             std::uint64_t size_bytes,
                             Callback on_deliver,
                             std::function<void(DropReason)> on_drop = {}) {
        LinkEntry& e = entry_mut(uid);
        ++counters_.tx_attempts;

        TransmissionRecord rec;
        rec.at = now_;
        rec.sender = sender;
        rec.link = uid;
        rec.role = role;
        rec.category = category;
        rec.size_bytes = size_bytes;

        if (e.model.state == LinkState::Down) {
            rec.dropped = true;
            rec.drop_reason = DropReason::LinkDown;
            trace_.append(rec);
            ++counters_.tx_dropped[drop_reason_name(DropReason::LinkDown)];
            return {false, DropReason::LinkDown, now_, 0};
        }
        if (e.model.loss_prob > 0.0 && e.rng.next_unit() < e.model.loss_prob) {
            rec.dropped = true;
            rec.drop_reason = DropReason::Loss;
            trace_.append(rec);
            ++counters_.tx_dropped[drop_reason_name(DropReason::Loss)];
            return {false, DropReason::Loss, now_, 0};
        }

        SimTime delay = e.model.base_latency +
                        serialization_delay(size_bytes, e.model.bandwidth_bps);
        if (e.model.jitter_bound.us() > 0) {
            delay = delay + SimTime::from_us(e.rng.next_in(0, e.model.jitter_bound.us()));
        }
        SimTime deliver_at = now_ + delay;
        rec.delivered_at = deliver_at;
        std::size_t rec_idx = trace_.append(rec);

        // Ids are handed out sequentially, so the delivery key is known before
        // the event is queued; the callback uses it to deregister itself.
        Key key{deliver_at, next_event_id_};
        e.in_flight.emplace(key, InFlight{rec_idx, std::move(on_drop)});
        EventId ev = schedule(deliver_at, [this, uid, key, fn = std::move(on_deliver)]() {
            entry_mut(uid).in_flight.erase(key);
            ++counters_.tx_delivered;
            fn();
        });
        return {true, DropReason::Loss, deliver_at, ev};
    }

    // Ends the run: everything still in flight is finalized as dropped so
    // per-link accounting stays exact (attempts == delivered + dropped).
    void finalize_run() {
        for (auto& [uid, e] : links_) drop_in_flight(e, DropReason::RunEnded);
    }

private:
    using Key = std::pair<SimTime, EventId>;

    struct InFlight {
        std::size_t rec_idx; // trace record to finalize on cancellation
        std::function<void(DropReason)> on_drop;
    };

    struct LinkEntry {
        LinkModel model;
        Rng rng;
        std::map<Key, InFlight> in_flight;
    };

    const LinkEntry& entry(LinkUid uid) const {
        auto it = links_.find(uid);
        if (it == links_.end()) {
            throw SimError(ErrorCode::UnknownTarget, "no such link " + to_hex(uid.value));
        }
        return it->second;
    }

    LinkEntry& entry_mut(LinkUid uid) {
        auto it = links_.find(uid);
        if (it == links_.end()) {
            throw SimError(ErrorCode::UnknownTarget, "no such link " + to_hex(uid.value));
        }
        return it->second;
    }

    void drop_in_flight(LinkEntry& e, DropReason reason) {
        // Detach first: an on_drop handler may transmit again on this link.
        std::map<Key, InFlight> doomed;
        doomed.swap(e.in_flight);
        for (auto& [key, inf] : doomed) {
            queue_.erase(key);
            auto& rec = std::get<TransmissionRecord>(trace_.at(inf.rec_idx));
            rec.dropped = true;
            rec.drop_reason = reason;
            rec.delivered_at = SimTime{};
            ++counters_.tx_dropped[drop_reason_name(reason)];
        }
        for (auto& [key, inf] : doomed) {
            if (inf.on_drop) inf.on_drop(reason);
        }
    }

    std::uint64_t seed_;
    SimTime now_{};
    EventId next_event_id_ = 1;
    std::map<Key, Callback> queue_;
    std::map<LinkUid, LinkEntry> links_;
    std::vector<LinkObserver> observers_;
    TraceLog trace_;
    Counters counters_;
};

} // namespace nomadsim
