#pragma once

#include "nomadsim/time.hpp"

#include <cstdint>

namespace nomadsim {

// One table for every tunable default. Scenario files may override any field
// through their `config` object; everything else in the library reads from
// here so a single override changes behavior coherently.
struct SimConfig {
    // -- control plane -------------------------------------------------------
    // Backhaul loss is *declared* only after this much continuous DOWN time;
    // short blips never leave CONNECTED mode.
    SimTime backhaul_loss_hysteresis = SimTime::from_sec(2);
    // Re-send a reconcile upload that got no answer after this long.
    SimTime reconcile_retry = SimTime::from_sec(5);

    // -- peer coordination ----------------------------------------------------
    SimTime beacon_interval = SimTime::from_sec(1);
    SimTime peer_ttl = SimTime::from_sec(3); // 3x beacon interval

    // -- topology / mobility --------------------------------------------------
    double internode_range_m = 5000.0;
    SimTime mobility_tick = SimTime::from_ms(100);
    SimTime internode_latency = SimTime::from_ms(5);
    std::uint64_t internode_bandwidth_bps = 20'000'000;

    // -- user plane -----------------------------------------------------------
    SimTime packet_ttl = SimTime::from_sec(30);
    std::uint64_t buffer_capacity_bytes = 10'000'000; // 10 MB per node
    SimTime rreq_timeout = SimTime::from_ms(500);
    std::uint32_t max_hop_retransmits = 3;

    // -- transport abstraction ------------------------------------------------
    // EWMA gains as exact rationals so the estimator runs in pure integer
    // microsecond arithmetic: srtt' = ((den-num)*srtt + num*sample) / den.
    std::uint32_t ewma_alpha_num = 1, ewma_alpha_den = 8;  // srtt gain 0.125
    std::uint32_t ewma_beta_num = 1, ewma_beta_den = 4;    // rttvar gain 0.25
    SimTime rto_min = SimTime::from_ms(200);
    SimTime rto_max = SimTime::from_sec(10);
    SimTime rto_initial = SimTime::from_ms(500); // used before any sample
    std::uint32_t base_window = 16;   // flow window at zero loss
    std::uint32_t loss_window_len = 20; // probes remembered per bearer
    SimTime switch_hysteresis = SimTime::from_sec(1);
    SimTime probe_interval = SimTime::from_ms(200);
    SimTime probe_timeout = SimTime::from_ms(500); // unanswered probe = loss

    // -- spectrum / regulatory ------------------------------------------------
    SimTime max_grant_duration = SimTime::from_sec(3600);
    SimTime grant_request_timeout = SimTime::from_sec(2); // then Denial(Timeout)
    std::uint32_t grant_max_retries = 3;                  // timeout retries, backoff x2
    SimTime grant_renew_lead = SimTime::from_sec(2);   // renew this early
    SimTime regrant_retry_interval = SimTime::from_sec(10); // after a denial
    SimTime regulatory_latency = SimTime::from_ms(20); // node <-> policy server
    std::uint64_t regulatory_bandwidth_bps = 10'000'000;

    // -- bearer link defaults (used when a scenario omits them) ---------------
    SimTime terrestrial_latency = SimTime::from_ms(20);
    SimTime satellite_latency = SimTime::from_ms(600);
    std::uint64_t backhaul_bandwidth_bps = 50'000'000;
};

} // namespace nomadsim
