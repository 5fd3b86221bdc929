#pragma once

#include "nomadsim/ids.hpp"
#include "nomadsim/time.hpp"

#include <cstdint>

namespace nomadsim {

enum class LinkState { Up, Down };

// Parametric point-to-point link: latency, bounded uniform jitter, Bernoulli
// loss, serialization at a fixed bandwidth.
struct LinkModel {
    SimTime base_latency = SimTime::from_ms(20);
    SimTime jitter_bound = SimTime::zero(); // added delay, uniform in [0, bound]
    double loss_prob = 0.0;
    std::int64_t bandwidth_bps = 50'000'000;
    LinkState state = LinkState::Up;

    bool up() const { return state == LinkState::Up; }
};

enum class DropReason {
    LinkDown,
    Loss,
    TtlExpired,
    Evicted,
    Oversize,
    RunEnded,
};

inline const char* drop_reason_name(DropReason r) {
    switch (r) {
        case DropReason::LinkDown: return "link_down";
        case DropReason::Loss: return "loss";
        case DropReason::TtlExpired: return "ttl_expired";
        case DropReason::Evicted: return "evicted";
        case DropReason::Oversize: return "oversize";
        case DropReason::RunEnded: return "run_ended";
    }
    return "?";
}

// Outcome of a single transmit() call. Delivery, when scheduled, happens at
// `deliver_at`; a drop is an outcome, not an error.
struct DeliveryOutcome {
    bool delivered = false;
    DropReason reason = DropReason::Loss;
    SimTime deliver_at = SimTime::zero();
    EventId event = 0;
};

// Serialization delay in whole microseconds, rounded up so nonzero payloads
// always cost time.
inline SimTime serialization_delay(std::size_t size_bytes, std::int64_t bandwidth_bps) {
    if (bandwidth_bps <= 0 || size_bytes == 0) return SimTime::zero();
    const std::int64_t bits = static_cast<std::int64_t>(size_bytes) * 8;
    return SimTime::from_us((bits * 1'000'000 + bandwidth_bps - 1) / bandwidth_bps);
}

} // namespace nomadsim
