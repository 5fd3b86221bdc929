#pragma once

#include "nomadsim/config.hpp"
#include "nomadsim/control_plane.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/geometry.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/link.hpp"
#include "nomadsim/mobility.hpp"
#include "nomadsim/siphash.hpp"
#include "nomadsim/spectrum.hpp"
#include "nomadsim/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace nomadsim {

using Json = nlohmann::ordered_json;

// ---- scenario model ----------------------------------------------------------

struct AuthoritySpec {
    AuthorityId id;
    MacKey key;
    std::vector<AuthorityId> federation; // whose tokens this authority honors
};

struct RegionSpec {
    Region geom;
    RegionalProfile profile;
};

struct TokenSpec {
    TokenId id = 0;
    AuthorityId issuer;
    TokenRequest request;
};

struct BearerSpec {
    BearerId id = 0;
    BearerKind kind = BearerKind::Terrestrial;
    SimTime latency;
    SimTime jitter;
    double loss = 0.0;
    std::int64_t bandwidth_bps = 0;
    bool initially_up = true;
};

struct NodeSpec {
    NodeId id = 0;
    DeploymentMode deployment = DeploymentMode::Hybrid;
    KeyId key_id = 0;
    std::optional<TokenId> token;
    std::optional<double> tx_power_dbm; // defaults to the token's cap
    std::vector<BearerSpec> bearers;    // priority order
    MobilityTrace trace;
};

struct TopologyEventSpec {
    SimTime at;
    BearerId bearer = 0;
    LinkState state = LinkState::Down;
};

enum class WorkloadKind { Control, Packet };

struct WorkloadItem {
    SimTime at;
    NodeId node = 0; // kCoreNode targets the central control plane
    WorkloadKind kind = WorkloadKind::Control;
    // control
    OpKind op = OpKind::Register;
    std::string subject;
    std::map<std::string, std::string> params;
    // packet burst: `count` packets of `size_bytes`, `interval` apart
    std::string session;
    std::uint64_t size_bytes = 0;
    std::uint32_t count = 1;
    SimTime interval;
};

struct Scenario {
    std::string name;
    SimTime duration;
    std::uint64_t seed = 0;
    SimConfig config;
    std::map<KeyId, MacKey> keys; // beacon/notification keyring
    std::vector<AuthoritySpec> authorities;
    std::vector<RegionSpec> regions;
    std::vector<TokenSpec> tokens;
    std::vector<NodeSpec> nodes;
    std::vector<TopologyEventSpec> topology_events;
    std::vector<WorkloadItem> workload;

    std::vector<Region> region_geoms() const {
        std::vector<Region> out;
        out.reserve(regions.size());
        for (const auto& r : regions) out.push_back(r.geom);
        return out;
    }
};

// ---- strict parsing helpers ----------------------------------------------------

namespace scenario_detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
    throw SimError(ErrorCode::ParseError, where + ": " + what);
}

[[noreturn]] inline void invalid(const std::string& where, const std::string& what) {
    throw SimError(ErrorCode::ValidationError, where + ": " + what);
}

inline void expect_keys(const Json& obj, const std::string& where,
                        std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) { ok = true; break; }
        }
        if (!ok) fail(where, "unknown key '" + key + "'");
    }
}

inline const Json& need(const Json& obj, const std::string& where, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing key '") + key + "'");
    return *it;
}

inline const Json* opt(const Json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline std::int64_t as_int(const Json& v, const std::string& where) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::uint64_t as_uint(const Json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0)) {
        fail(where, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline double as_num(const Json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

inline std::string as_str(const Json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
}

inline bool as_bool(const Json& v, const std::string& where) {
    if (!v.is_boolean()) fail(where, "expected a boolean");
    return v.get<bool>();
}

inline const Json& as_array(const Json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array");
    return v;
}

inline const Json& as_object(const Json& v, const std::string& where) {
    if (!v.is_object()) fail(where, "expected an object");
    return v;
}

inline SimTime time_us(const Json& v, const std::string& where) {
    return SimTime::from_us(as_int(v, where));
}

inline std::uint64_t hex_u64(const std::string& hex, const std::string& where) {
    if (hex.size() != 16) fail(where, "expected 16 hex chars per key half");
    std::uint64_t out = 0;
    for (char c : hex) {
        out <<= 4;
        if (c >= '0' && c <= '9') out |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') out |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') out |= static_cast<std::uint64_t>(c - 'A' + 10);
        else fail(where, "invalid hex digit");
    }
    return out;
}

// 128-bit key as 32 hex chars, big-endian halves.
inline MacKey parse_key_hex(const std::string& hex, const std::string& where) {
    if (hex.size() != 32) fail(where, "expected 32 hex chars");
    return MacKey{hex_u64(hex.substr(0, 16), where), hex_u64(hex.substr(16), where)};
}

inline std::string key_to_hex(MacKey k) {
    return to_hex(k.k0) + to_hex(k.k1);
}

} // namespace scenario_detail

// ---- config block ---------------------------------------------------------------

inline void parse_config_overrides(const Json& j, SimConfig& cfg, const std::string& where) {
    using namespace scenario_detail;
    expect_keys(j, where,
                {"backhaul_loss_hysteresis_us", "reconcile_retry_us", "beacon_interval_us",
                 "peer_ttl_us", "internode_range_m", "mobility_tick_us", "internode_latency_us",
                 "internode_bandwidth_bps", "packet_ttl_us", "buffer_capacity_bytes",
                 "rreq_timeout_us", "max_hop_retransmits", "ewma_alpha", "ewma_beta",
                 "rto_min_us", "rto_max_us", "rto_initial_us", "base_window", "loss_window_len",
                 "switch_hysteresis_us", "probe_interval_us", "probe_timeout_us",
                 "max_grant_duration_us", "grant_request_timeout_us", "grant_max_retries",
                 "grant_renew_lead_us", "regrant_retry_interval_us", "regulatory_latency_us",
                 "regulatory_bandwidth_bps", "terrestrial_latency_us", "satellite_latency_us",
                 "backhaul_bandwidth_bps"});

    auto set_time = [&](const char* key, SimTime& out) {
        if (const Json* v = opt(j, key)) out = time_us(*v, where + "." + key);
    };
    auto set_u64 = [&](const char* key, std::uint64_t& out) {
        if (const Json* v = opt(j, key)) out = as_uint(*v, where + "." + key);
    };
    auto set_u32 = [&](const char* key, std::uint32_t& out) {
        if (const Json* v = opt(j, key)) {
            out = static_cast<std::uint32_t>(as_uint(*v, where + "." + key));
        }
    };
    auto set_ratio = [&](const char* key, std::uint32_t& num, std::uint32_t& den) {
        if (const Json* v = opt(j, key)) {
            const Json& arr = as_array(*v, where + "." + key);
            if (arr.size() != 2) fail(where + "." + key, "expected [numerator, denominator]");
            num = static_cast<std::uint32_t>(as_uint(arr[0], where + "." + key));
            den = static_cast<std::uint32_t>(as_uint(arr[1], where + "." + key));
            if (den == 0 || num >= den) fail(where + "." + key, "gain must be in (0,1)");
        }
    };

    set_time("backhaul_loss_hysteresis_us", cfg.backhaul_loss_hysteresis);
    set_time("reconcile_retry_us", cfg.reconcile_retry);
    set_time("beacon_interval_us", cfg.beacon_interval);
    set_time("peer_ttl_us", cfg.peer_ttl);
    if (const Json* v = opt(j, "internode_range_m")) {
        cfg.internode_range_m = as_num(*v, where + ".internode_range_m");
    }
    set_time("mobility_tick_us", cfg.mobility_tick);
    set_time("internode_latency_us", cfg.internode_latency);
    set_u64("internode_bandwidth_bps", cfg.internode_bandwidth_bps);
    set_time("packet_ttl_us", cfg.packet_ttl);
    set_u64("buffer_capacity_bytes", cfg.buffer_capacity_bytes);
    set_time("rreq_timeout_us", cfg.rreq_timeout);
    set_u32("max_hop_retransmits", cfg.max_hop_retransmits);
    set_ratio("ewma_alpha", cfg.ewma_alpha_num, cfg.ewma_alpha_den);
    set_ratio("ewma_beta", cfg.ewma_beta_num, cfg.ewma_beta_den);
    set_time("rto_min_us", cfg.rto_min);
    set_time("rto_max_us", cfg.rto_max);
    set_time("rto_initial_us", cfg.rto_initial);
    set_u32("base_window", cfg.base_window);
    set_u32("loss_window_len", cfg.loss_window_len);
    set_time("switch_hysteresis_us", cfg.switch_hysteresis);
    set_time("probe_interval_us", cfg.probe_interval);
    set_time("probe_timeout_us", cfg.probe_timeout);
    set_time("max_grant_duration_us", cfg.max_grant_duration);
    set_time("grant_request_timeout_us", cfg.grant_request_timeout);
    set_u32("grant_max_retries", cfg.grant_max_retries);
    set_time("grant_renew_lead_us", cfg.grant_renew_lead);
    set_time("regrant_retry_interval_us", cfg.regrant_retry_interval);
    set_time("regulatory_latency_us", cfg.regulatory_latency);
    set_u64("regulatory_bandwidth_bps", cfg.regulatory_bandwidth_bps);
    set_time("terrestrial_latency_us", cfg.terrestrial_latency);
    set_time("satellite_latency_us", cfg.satellite_latency);
    set_u64("backhaul_bandwidth_bps", cfg.backhaul_bandwidth_bps);
}

inline Json config_to_json(const SimConfig& cfg) {
    Json j = Json::object();
    j["backhaul_loss_hysteresis_us"] = cfg.backhaul_loss_hysteresis.us();
    j["reconcile_retry_us"] = cfg.reconcile_retry.us();
    j["beacon_interval_us"] = cfg.beacon_interval.us();
    j["peer_ttl_us"] = cfg.peer_ttl.us();
    j["internode_range_m"] = cfg.internode_range_m;
    j["mobility_tick_us"] = cfg.mobility_tick.us();
    j["internode_latency_us"] = cfg.internode_latency.us();
    j["internode_bandwidth_bps"] = cfg.internode_bandwidth_bps;
    j["packet_ttl_us"] = cfg.packet_ttl.us();
    j["buffer_capacity_bytes"] = cfg.buffer_capacity_bytes;
    j["rreq_timeout_us"] = cfg.rreq_timeout.us();
    j["max_hop_retransmits"] = cfg.max_hop_retransmits;
    j["ewma_alpha"] = Json::array({cfg.ewma_alpha_num, cfg.ewma_alpha_den});
    j["ewma_beta"] = Json::array({cfg.ewma_beta_num, cfg.ewma_beta_den});
    j["rto_min_us"] = cfg.rto_min.us();
    j["rto_max_us"] = cfg.rto_max.us();
    j["rto_initial_us"] = cfg.rto_initial.us();
    j["base_window"] = cfg.base_window;
    j["loss_window_len"] = cfg.loss_window_len;
    j["switch_hysteresis_us"] = cfg.switch_hysteresis.us();
    j["probe_interval_us"] = cfg.probe_interval.us();
    j["probe_timeout_us"] = cfg.probe_timeout.us();
    j["max_grant_duration_us"] = cfg.max_grant_duration.us();
    j["grant_request_timeout_us"] = cfg.grant_request_timeout.us();
    j["grant_max_retries"] = cfg.grant_max_retries;
    j["grant_renew_lead_us"] = cfg.grant_renew_lead.us();
    j["regrant_retry_interval_us"] = cfg.regrant_retry_interval.us();
    j["regulatory_latency_us"] = cfg.regulatory_latency.us();
    j["regulatory_bandwidth_bps"] = cfg.regulatory_bandwidth_bps;
    j["terrestrial_latency_us"] = cfg.terrestrial_latency.us();
    j["satellite_latency_us"] = cfg.satellite_latency.us();
    j["backhaul_bandwidth_bps"] = cfg.backhaul_bandwidth_bps;
    return j;
}

// ---- scenario parsing ------------------------------------------------------------

inline Scenario parse_scenario_json(const Json& root) {
    using namespace scenario_detail;
    Scenario sc;
    const std::string top = "scenario";
    as_object(root, top);
    expect_keys(root, top,
                {"name", "duration_us", "seed", "config", "keys", "authorities", "regions",
                 "tokens", "nodes", "topology_events", "workload"});

    sc.name = as_str(need(root, top, "name"), top + ".name");
    sc.duration = time_us(need(root, top, "duration_us"), top + ".duration_us");
    sc.seed = as_uint(need(root, top, "seed"), top + ".seed");
    if (const Json* v = opt(root, "config")) {
        parse_config_overrides(as_object(*v, top + ".config"), sc.config, top + ".config");
    }

    if (const Json* v = opt(root, "keys")) {
        const Json& arr = as_array(*v, top + ".keys");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".keys[" + std::to_string(i) + "]";
            const Json& k = as_object(arr[i], where);
            expect_keys(k, where, {"key_id", "key_hex"});
            auto id = static_cast<KeyId>(as_uint(need(k, where, "key_id"), where + ".key_id"));
            MacKey mk = parse_key_hex(as_str(need(k, where, "key_hex"), where + ".key_hex"), where);
            if (!sc.keys.emplace(id, mk).second) invalid(where, "duplicate key_id");
        }
    }

    if (const Json* v = opt(root, "authorities")) {
        const Json& arr = as_array(*v, top + ".authorities");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".authorities[" + std::to_string(i) + "]";
            const Json& a = as_object(arr[i], where);
            expect_keys(a, where, {"id", "key_hex", "federation"});
            AuthoritySpec spec;
            spec.id = as_str(need(a, where, "id"), where + ".id");
            spec.key = parse_key_hex(as_str(need(a, where, "key_hex"), where + ".key_hex"), where);
            if (const Json* f = opt(a, "federation")) {
                for (const Json& fa : as_array(*f, where + ".federation")) {
                    spec.federation.push_back(as_str(fa, where + ".federation[]"));
                }
            }
            sc.authorities.push_back(std::move(spec));
        }
    }

    if (const Json* v = opt(root, "regions")) {
        const Json& arr = as_array(*v, top + ".regions");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".regions[" + std::to_string(i) + "]";
            const Json& r = as_object(arr[i], where);
            expect_keys(r, where, {"id", "authority", "x0_m", "y0_m", "x1_m", "y1_m", "profile"});
            RegionSpec spec;
            spec.geom.id = static_cast<RegionId>(as_uint(need(r, where, "id"), where + ".id"));
            spec.geom.authority = as_str(need(r, where, "authority"), where + ".authority");
            spec.geom.x0 = as_num(need(r, where, "x0_m"), where + ".x0_m");
            spec.geom.y0 = as_num(need(r, where, "y0_m"), where + ".y0_m");
            spec.geom.x1 = as_num(need(r, where, "x1_m"), where + ".x1_m");
            spec.geom.y1 = as_num(need(r, where, "y1_m"), where + ".y1_m");
            spec.profile.region = spec.geom.id;
            if (const Json* p = opt(r, "profile")) {
                const std::string pw = where + ".profile";
                const Json& prof = as_object(*p, pw);
                expect_keys(prof, pw,
                            {"power_cap_dbm", "excluded_operator_classes", "bands", "incumbents"});
                if (const Json* cap = opt(prof, "power_cap_dbm")) {
                    spec.profile.power_cap_dbm = as_num(*cap, pw + ".power_cap_dbm");
                }
                if (const Json* ex = opt(prof, "excluded_operator_classes")) {
                    for (const Json& c : as_array(*ex, pw + ".excluded_operator_classes")) {
                        std::string s = as_str(c, pw + ".excluded_operator_classes[]");
                        if (s == "PRIVATE") spec.profile.excluded_classes.insert(OperatorClass::Private);
                        else if (s == "MNO") spec.profile.excluded_classes.insert(OperatorClass::Mno);
                        else fail(pw, "unknown operator class '" + s + "'");
                    }
                }
                if (const Json* bs = opt(prof, "bands")) {
                    for (const Json& b : as_array(*bs, pw + ".bands")) {
                        const std::string bw = pw + ".bands[]";
                        const Json& bo = as_object(b, bw);
                        expect_keys(bo, bw, {"band", "access"});
                        auto band = static_cast<BandId>(as_uint(need(bo, bw, "band"), bw + ".band"));
                        std::string acc = as_str(need(bo, bw, "access"), bw + ".access");
                        AccessModel m;
                        if (acc == "EXCLUSIVE") m = AccessModel::Exclusive;
                        else if (acc == "TIERED") m = AccessModel::Tiered;
                        else if (acc == "OPEN") m = AccessModel::Open;
                        else fail(bw, "unknown access model '" + acc + "'");
                        if (!spec.profile.bands.emplace(band, m).second) {
                            invalid(bw, "duplicate band in profile");
                        }
                    }
                }
                if (const Json* inc = opt(prof, "incumbents")) {
                    for (const Json& s : as_array(*inc, pw + ".incumbents")) {
                        const std::string iw = pw + ".incumbents[]";
                        const Json& so = as_object(s, iw);
                        expect_keys(so, iw, {"band", "start_us", "end_us"});
                        IncumbentSlot slot;
                        slot.band = static_cast<BandId>(as_uint(need(so, iw, "band"), iw + ".band"));
                        slot.window.start = time_us(need(so, iw, "start_us"), iw + ".start_us");
                        slot.window.end = time_us(need(so, iw, "end_us"), iw + ".end_us");
                        spec.profile.incumbents.push_back(slot);
                    }
                }
            }
            sc.regions.push_back(std::move(spec));
        }
    }

    if (const Json* v = opt(root, "tokens")) {
        const Json& arr = as_array(*v, top + ".tokens");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".tokens[" + std::to_string(i) + "]";
            const Json& t = as_object(arr[i], where);
            expect_keys(t, where,
                        {"id", "issuer", "subject", "operator_class", "bands", "regions",
                         "not_before_us", "not_after_us", "max_power_dbm"});
            TokenSpec spec;
            spec.id = as_uint(need(t, where, "id"), where + ".id");
            spec.issuer = as_str(need(t, where, "issuer"), where + ".issuer");
            spec.request.subject = as_str(need(t, where, "subject"), where + ".subject");
            std::string cls = as_str(need(t, where, "operator_class"), where + ".operator_class");
            if (cls == "PRIVATE") spec.request.op_class = OperatorClass::Private;
            else if (cls == "MNO") spec.request.op_class = OperatorClass::Mno;
            else fail(where, "unknown operator class '" + cls + "'");
            for (const Json& b : as_array(need(t, where, "bands"), where + ".bands")) {
                spec.request.bands.insert(static_cast<BandId>(as_uint(b, where + ".bands[]")));
            }
            const Json& regs = need(t, where, "regions");
            if (regs.is_string()) {
                if (regs.get<std::string>() != "ANY") fail(where + ".regions", "expected ids or \"ANY\"");
                spec.request.any_region = true;
            } else {
                for (const Json& r : as_array(regs, where + ".regions")) {
                    spec.request.regions.insert(
                        static_cast<RegionId>(as_uint(r, where + ".regions[]")));
                }
            }
            spec.request.not_before = time_us(need(t, where, "not_before_us"), where + ".not_before_us");
            spec.request.not_after = time_us(need(t, where, "not_after_us"), where + ".not_after_us");
            spec.request.max_power_dbm = as_num(need(t, where, "max_power_dbm"), where + ".max_power_dbm");
            sc.tokens.push_back(std::move(spec));
        }
    }

    if (const Json* v = opt(root, "nodes")) {
        const Json& arr = as_array(*v, top + ".nodes");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".nodes[" + std::to_string(i) + "]";
            const Json& n = as_object(arr[i], where);
            expect_keys(n, where,
                        {"id", "deployment", "key_id", "token", "tx_power_dbm", "bearers", "trace"});
            NodeSpec spec;
            spec.id = static_cast<NodeId>(as_uint(need(n, where, "id"), where + ".id"));
            std::string dep = as_str(need(n, where, "deployment"), where + ".deployment");
            if (dep == "INTEGRATED") spec.deployment = DeploymentMode::Integrated;
            else if (dep == "HYBRID") spec.deployment = DeploymentMode::Hybrid;
            else fail(where, "unknown deployment '" + dep + "'");
            spec.key_id = static_cast<KeyId>(as_uint(need(n, where, "key_id"), where + ".key_id"));
            if (const Json* tok = opt(n, "token")) {
                spec.token = as_uint(*tok, where + ".token");
            }
            if (const Json* pw = opt(n, "tx_power_dbm")) {
                spec.tx_power_dbm = as_num(*pw, where + ".tx_power_dbm");
            }
            if (const Json* bs = opt(n, "bearers")) {
                for (const Json& b : as_array(*bs, where + ".bearers")) {
                    const std::string bw = where + ".bearers[]";
                    const Json& bo = as_object(b, bw);
                    expect_keys(bo, bw,
                                {"id", "kind", "latency_us", "jitter_us", "loss", "bandwidth_bps",
                                 "initial"});
                    BearerSpec bear;
                    bear.id = static_cast<BearerId>(as_uint(need(bo, bw, "id"), bw + ".id"));
                    std::string kind = as_str(need(bo, bw, "kind"), bw + ".kind");
                    if (kind == "TERRESTRIAL") bear.kind = BearerKind::Terrestrial;
                    else if (kind == "SATELLITE") bear.kind = BearerKind::Satellite;
                    else fail(bw, "unknown bearer kind '" + kind + "'");
                    bear.latency = bear.kind == BearerKind::Terrestrial
                                       ? sc.config.terrestrial_latency
                                       : sc.config.satellite_latency;
                    if (const Json* lat = opt(bo, "latency_us")) {
                        bear.latency = time_us(*lat, bw + ".latency_us");
                    }
                    if (const Json* jit = opt(bo, "jitter_us")) {
                        bear.jitter = time_us(*jit, bw + ".jitter_us");
                    }
                    if (const Json* lo = opt(bo, "loss")) {
                        bear.loss = as_num(*lo, bw + ".loss");
                        if (bear.loss < 0.0 || bear.loss >= 1.0) fail(bw + ".loss", "must be in [0,1)");
                    }
                    bear.bandwidth_bps = static_cast<std::int64_t>(sc.config.backhaul_bandwidth_bps);
                    if (const Json* bps = opt(bo, "bandwidth_bps")) {
                        bear.bandwidth_bps = as_int(*bps, bw + ".bandwidth_bps");
                    }
                    if (const Json* init = opt(bo, "initial")) {
                        std::string s = as_str(*init, bw + ".initial");
                        if (s == "UP") bear.initially_up = true;
                        else if (s == "DOWN") bear.initially_up = false;
                        else fail(bw + ".initial", "expected UP or DOWN");
                    }
                    spec.bearers.push_back(bear);
                }
            }
            for (const Json& w : as_array(need(n, where, "trace"), where + ".trace")) {
                const std::string ww = where + ".trace[]";
                const Json& wo = as_object(w, ww);
                expect_keys(wo, ww, {"at_us", "x_m", "y_m"});
                Waypoint wp;
                wp.at = time_us(need(wo, ww, "at_us"), ww + ".at_us");
                wp.pos.x = as_num(need(wo, ww, "x_m"), ww + ".x_m");
                wp.pos.y = as_num(need(wo, ww, "y_m"), ww + ".y_m");
                spec.trace.waypoints.push_back(wp);
            }
            sc.nodes.push_back(std::move(spec));
        }
    }

    if (const Json* v = opt(root, "topology_events")) {
        const Json& arr = as_array(*v, top + ".topology_events");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".topology_events[" + std::to_string(i) + "]";
            const Json& e = as_object(arr[i], where);
            expect_keys(e, where, {"at_us", "bearer", "state"});
            TopologyEventSpec ev;
            ev.at = time_us(need(e, where, "at_us"), where + ".at_us");
            ev.bearer = static_cast<BearerId>(as_uint(need(e, where, "bearer"), where + ".bearer"));
            std::string st = as_str(need(e, where, "state"), where + ".state");
            if (st == "UP") ev.state = LinkState::Up;
            else if (st == "DOWN") ev.state = LinkState::Down;
            else fail(where + ".state", "expected UP or DOWN");
            sc.topology_events.push_back(ev);
        }
    }

    if (const Json* v = opt(root, "workload")) {
        const Json& arr = as_array(*v, top + ".workload");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string where = top + ".workload[" + std::to_string(i) + "]";
            const Json& w = as_object(arr[i], where);
            WorkloadItem item;
            item.at = time_us(need(w, where, "at_us"), where + ".at_us");
            item.node = static_cast<NodeId>(as_uint(need(w, where, "node"), where + ".node"));
            std::string kind = as_str(need(w, where, "kind"), where + ".kind");
            if (kind == "control") {
                expect_keys(w, where, {"at_us", "node", "kind", "op", "subject", "params"});
                item.kind = WorkloadKind::Control;
                std::string op = as_str(need(w, where, "op"), where + ".op");
                auto parsed = op_kind_from(op);
                if (!parsed) fail(where + ".op", "unknown op '" + op + "'");
                item.op = *parsed;
                item.subject = as_str(need(w, where, "subject"), where + ".subject");
                if (const Json* p = opt(w, "params")) {
                    for (const auto& [k, pv] : as_object(*p, where + ".params").items()) {
                        item.params[k] = as_str(pv, where + ".params." + k);
                    }
                }
            } else if (kind == "packet") {
                expect_keys(w, where,
                            {"at_us", "node", "kind", "session", "size_bytes", "count",
                             "interval_us"});
                item.kind = WorkloadKind::Packet;
                item.session = as_str(need(w, where, "session"), where + ".session");
                item.size_bytes = as_uint(need(w, where, "size_bytes"), where + ".size_bytes");
                if (const Json* c = opt(w, "count")) {
                    item.count = static_cast<std::uint32_t>(as_uint(*c, where + ".count"));
                    if (item.count == 0) fail(where + ".count", "must be >= 1");
                }
                if (const Json* iv = opt(w, "interval_us")) {
                    item.interval = time_us(*iv, where + ".interval_us");
                }
            } else {
                fail(where + ".kind", "expected 'control' or 'packet'");
            }
            sc.workload.push_back(std::move(item));
        }
    }

    return sc;
}

// ---- referential validation (hard errors) -----------------------------------------

inline void check_scenario(const Scenario& sc) {
    using scenario_detail::invalid;
    if (sc.duration <= SimTime::zero()) invalid("scenario.duration_us", "must be positive");
    if (sc.name.empty()) invalid("scenario.name", "must not be empty");

    std::set<AuthorityId> auth_ids;
    for (const auto& a : sc.authorities) {
        if (!auth_ids.insert(a.id).second) invalid("authorities", "duplicate id '" + a.id + "'");
    }
    for (const auto& a : sc.authorities) {
        for (const auto& f : a.federation) {
            if (!auth_ids.count(f)) {
                invalid("authorities", "'" + a.id + "' federates unknown authority '" + f + "'");
            }
        }
    }

    std::set<RegionId> region_ids;
    for (const auto& r : sc.regions) {
        if (!region_ids.insert(r.geom.id).second) {
            invalid("regions", "duplicate id " + std::to_string(r.geom.id));
        }
        if (r.geom.degenerate()) {
            invalid("regions", "region " + std::to_string(r.geom.id) + " has empty area");
        }
        if (!auth_ids.count(r.geom.authority)) {
            invalid("regions", "region " + std::to_string(r.geom.id) + " names unknown authority '" +
                                   r.geom.authority + "'");
        }
        for (const auto& slot : r.profile.incumbents) {
            if (!r.profile.bands.count(slot.band)) {
                invalid("regions", "region " + std::to_string(r.geom.id) +
                                       " incumbent on unlisted band " + std::to_string(slot.band));
            }
            if (slot.window.empty()) {
                invalid("regions", "region " + std::to_string(r.geom.id) + " incumbent window empty");
            }
        }
    }

    std::set<TokenId> token_ids;
    for (const auto& t : sc.tokens) {
        if (!token_ids.insert(t.id).second) {
            invalid("tokens", "duplicate id " + std::to_string(t.id));
        }
        if (!auth_ids.count(t.issuer)) {
            invalid("tokens", "token " + std::to_string(t.id) + " names unknown issuer '" +
                                  t.issuer + "'");
        }
        if (t.request.bands.empty()) {
            invalid("tokens", "token " + std::to_string(t.id) + " has no bands");
        }
        if (t.request.not_after <= t.request.not_before) {
            invalid("tokens", "token " + std::to_string(t.id) + " validity window empty");
        }
        for (RegionId r : t.request.regions) {
            if (!region_ids.count(r)) {
                invalid("tokens", "token " + std::to_string(t.id) + " names unknown region " +
                                      std::to_string(r));
            }
        }
    }

    std::set<NodeId> node_ids;
    std::set<BearerId> bearer_ids;
    for (const auto& n : sc.nodes) {
        if (n.id == kCoreNode) invalid("nodes", "node id 0 is reserved for the core");
        if (!node_ids.insert(n.id).second) {
            invalid("nodes", "duplicate id " + std::to_string(n.id));
        }
        if (!sc.keys.count(n.key_id)) {
            invalid("nodes", "node " + std::to_string(n.id) + " names unknown key_id " +
                                 std::to_string(n.key_id));
        }
        if (n.token && !token_ids.count(*n.token)) {
            invalid("nodes", "node " + std::to_string(n.id) + " names unknown token " +
                                 std::to_string(*n.token));
        }
        for (const auto& b : n.bearers) {
            if (b.id == 0) invalid("nodes", "bearer id 0 is reserved");
            if (!bearer_ids.insert(b.id).second) {
                invalid("nodes", "duplicate bearer id " + std::to_string(b.id));
            }
        }
        if (!n.trace.valid()) {
            invalid("nodes", "node " + std::to_string(n.id) +
                                 " trace must be non-empty and strictly time-ordered");
        }
    }

    for (const auto& e : sc.topology_events) {
        if (!bearer_ids.count(e.bearer)) {
            invalid("topology_events", "unknown bearer " + std::to_string(e.bearer));
        }
    }

    for (std::size_t i = 0; i < sc.workload.size(); ++i) {
        const auto& w = sc.workload[i];
        const std::string where = "workload[" + std::to_string(i) + "]";
        if (w.kind == WorkloadKind::Control) {
            if (w.node != kCoreNode && !node_ids.count(w.node)) {
                invalid(where, "unknown node " + std::to_string(w.node));
            }
        } else {
            if (!node_ids.count(w.node)) {
                invalid(where, "unknown node " + std::to_string(w.node));
            }
            if (w.size_bytes == 0) invalid(where, "packet size must be positive");
        }
        if (w.at > sc.duration) invalid(where, "scheduled after scenario end");
    }
}

// ---- soft lints --------------------------------------------------------------------

struct ScenarioWarning {
    std::string code;
    std::string detail;
};

inline std::vector<ScenarioWarning> validate_scenario(const Scenario& sc) {
    std::vector<ScenarioWarning> out;
    const auto geoms = sc.region_geoms();
    for (const auto& n : sc.nodes) {
        if (!n.token) {
            out.push_back({"NodeWithoutToken",
                           "node " + std::to_string(n.id) + " holds no entitlement token and will "
                           "stay radio-silent everywhere"});
        }
        // Sample the trajectory at waypoints and segment midpoints; cheap and
        // catches any excursion that matters at waypoint resolution.
        bool uncovered = false;
        const auto& wp = n.trace.waypoints;
        for (std::size_t i = 0; i < wp.size() && !uncovered; ++i) {
            if (!region_of(wp[i].pos, geoms)) uncovered = true;
            if (i + 1 < wp.size()) {
                GeoPoint mid{(wp[i].pos.x + wp[i + 1].pos.x) / 2,
                             (wp[i].pos.y + wp[i + 1].pos.y) / 2};
                if (!region_of(mid, geoms)) uncovered = true;
            }
        }
        if (uncovered) {
            out.push_back({"UncoveredTrajectory",
                           "node " + std::to_string(n.id) + " leaves region coverage"});
        }
    }
    if (sc.workload.empty()) {
        out.push_back({"ZeroWorkload", "scenario drives no control requests or packets"});
    }
    return out;
}

// ---- serialization (normalized form) ------------------------------------------------

inline Json scenario_to_json(const Scenario& sc) {
    using scenario_detail::key_to_hex;
    Json j = Json::object();
    j["name"] = sc.name;
    j["duration_us"] = sc.duration.us();
    j["seed"] = sc.seed;
    j["config"] = config_to_json(sc.config);
    j["keys"] = Json::array();
    for (const auto& [id, key] : sc.keys) {
        j["keys"].push_back({{"key_id", id}, {"key_hex", key_to_hex(key)}});
    }
    j["authorities"] = Json::array();
    for (const auto& a : sc.authorities) {
        Json o{{"id", a.id}, {"key_hex", key_to_hex(a.key)}};
        o["federation"] = a.federation;
        j["authorities"].push_back(std::move(o));
    }
    j["regions"] = Json::array();
    for (const auto& r : sc.regions) {
        Json o{{"id", r.geom.id},       {"authority", r.geom.authority}, {"x0_m", r.geom.x0},
               {"y0_m", r.geom.y0},     {"x1_m", r.geom.x1},             {"y1_m", r.geom.y1}};
        Json prof = Json::object();
        prof["power_cap_dbm"] = r.profile.power_cap_dbm;
        prof["excluded_operator_classes"] = Json::array();
        for (OperatorClass c : r.profile.excluded_classes) {
            prof["excluded_operator_classes"].push_back(operator_class_name(c));
        }
        prof["bands"] = Json::array();
        for (const auto& [band, model] : r.profile.bands) {
            prof["bands"].push_back({{"band", band}, {"access", access_model_name(model)}});
        }
        prof["incumbents"] = Json::array();
        for (const auto& s : r.profile.incumbents) {
            prof["incumbents"].push_back(
                {{"band", s.band}, {"start_us", s.window.start.us()}, {"end_us", s.window.end.us()}});
        }
        o["profile"] = std::move(prof);
        j["regions"].push_back(std::move(o));
    }
    j["tokens"] = Json::array();
    for (const auto& t : sc.tokens) {
        Json o{{"id", t.id},
               {"issuer", t.issuer},
               {"subject", t.request.subject},
               {"operator_class", operator_class_name(t.request.op_class)}};
        o["bands"] = t.request.bands;
        if (t.request.any_region) o["regions"] = "ANY";
        else o["regions"] = t.request.regions;
        o["not_before_us"] = t.request.not_before.us();
        o["not_after_us"] = t.request.not_after.us();
        o["max_power_dbm"] = t.request.max_power_dbm;
        j["tokens"].push_back(std::move(o));
    }
    j["nodes"] = Json::array();
    for (const auto& n : sc.nodes) {
        Json o{{"id", n.id},
               {"deployment", deployment_mode_name(n.deployment)},
               {"key_id", n.key_id}};
        if (n.token) o["token"] = *n.token;
        if (n.tx_power_dbm) o["tx_power_dbm"] = *n.tx_power_dbm;
        o["bearers"] = Json::array();
        for (const auto& b : n.bearers) {
            o["bearers"].push_back({{"id", b.id},
                                    {"kind", bearer_kind_name(b.kind)},
                                    {"latency_us", b.latency.us()},
                                    {"jitter_us", b.jitter.us()},
                                    {"loss", b.loss},
                                    {"bandwidth_bps", b.bandwidth_bps},
                                    {"initial", b.initially_up ? "UP" : "DOWN"}});
        }
        o["trace"] = Json::array();
        for (const auto& w : n.trace.waypoints) {
            o["trace"].push_back({{"at_us", w.at.us()}, {"x_m", w.pos.x}, {"y_m", w.pos.y}});
        }
        j["nodes"].push_back(std::move(o));
    }
    j["topology_events"] = Json::array();
    for (const auto& e : sc.topology_events) {
        j["topology_events"].push_back({{"at_us", e.at.us()},
                                        {"bearer", e.bearer},
                                        {"state", e.state == LinkState::Up ? "UP" : "DOWN"}});
    }
    j["workload"] = Json::array();
    for (const auto& w : sc.workload) {
        Json o{{"at_us", w.at.us()}, {"node", w.node}};
        if (w.kind == WorkloadKind::Control) {
            o["kind"] = "control";
            o["op"] = op_kind_name(w.op);
            o["subject"] = w.subject;
            o["params"] = w.params;
        } else {
            o["kind"] = "packet";
            o["session"] = w.session;
            o["size_bytes"] = w.size_bytes;
            o["count"] = w.count;
            o["interval_us"] = w.interval.us();
        }
        j["workload"].push_back(std::move(o));
    }
    return j;
}

// ---- file I/O -----------------------------------------------------------------------

inline Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SimError(ErrorCode::IoError, "cannot open '" + path + "'");
    Json root;
    try {
        root = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SimError(ErrorCode::ParseError, path + ": " + e.what());
    }
    Scenario sc = parse_scenario_json(root);
    check_scenario(sc);
    return sc;
}

} // namespace nomadsim
