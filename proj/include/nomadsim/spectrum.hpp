#pragma once

#include "nomadsim/bytes.hpp"
#include "nomadsim/config.hpp"
#include "nomadsim/errors.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/siphash.hpp"
#include "nomadsim/time.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nomadsim {

enum class OperatorClass : std::uint8_t { Private = 0, Mno = 1 };

inline const char* operator_class_name(OperatorClass c) {
    return c == OperatorClass::Private ? "PRIVATE" : "MNO";
}

// Signed, conditional, pre-authorized spectrum credential. `any_region`
// widens the region set to the whole of the ISSUER's jurisdiction — it never
// crosses into another authority's regions.
struct EntitlementToken {
    TokenId id = 0;
    AuthorityId issuer;
    std::string subject; // operator identifier
    OperatorClass op_class = OperatorClass::Private;
    std::set<BandId> bands;
    std::set<RegionId> regions;
    bool any_region = false;
    SimTime not_before;
    SimTime not_after;
    double max_power_dbm = 0.0;
    std::uint64_t mac = 0;

    bool covers_band(BandId b) const { return bands.count(b) > 0; }
    bool covers_region(RegionId r) const { return any_region || regions.count(r) > 0; }
};

// Canonical wire form for MAC computation: fixed field order, fixed-width
// big-endian integers, length-prefixed strings, sets in ascending order.
inline std::vector<std::uint8_t> token_signing_bytes(const EntitlementToken& t) {
    ByteWriter w;
    w.u64(t.id);
    w.str(t.issuer);
    w.str(t.subject);
    w.u8(static_cast<std::uint8_t>(t.op_class));
    w.u32(static_cast<std::uint32_t>(t.bands.size()));
    for (BandId b : t.bands) w.u32(b);
    w.u8(t.any_region ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(t.regions.size()));
    for (RegionId r : t.regions) w.u32(r);
    w.i64(t.not_before.us());
    w.i64(t.not_after.us());
    w.f64(t.max_power_dbm);
    return w.bytes();
}

struct TokenRequest {
    std::string subject;
    OperatorClass op_class = OperatorClass::Private;
    std::set<BandId> bands;
    std::set<RegionId> regions;
    bool any_region = false;
    SimTime not_before;
    SimTime not_after;
    double max_power_dbm = 0.0;
};

// Mints a token under the issuer's key. The id must be unique per issuer;
// callers hand in a counter.
inline EntitlementToken issue_token(const AuthorityId& issuer, const MacKey& key,
                                    const TokenRequest& req, TokenId id) {
    if (req.not_after <= req.not_before) {
        throw SimError(ErrorCode::EmptyWindow, "token validity window is empty");
    }
    if (req.bands.empty()) {
        throw SimError(ErrorCode::ValidationError, "token must name at least one band");
    }
    EntitlementToken t;
    t.id = id;
    t.issuer = issuer;
    t.subject = req.subject;
    t.op_class = req.op_class;
    t.bands = req.bands;
    t.regions = req.regions;
    t.any_region = req.any_region;
    t.not_before = req.not_before;
    t.not_after = req.not_after;
    t.max_power_dbm = req.max_power_dbm;
    t.mac = siphash24(key, token_signing_bytes(t));
    return t;
}

enum class AccessModel : std::uint8_t { Exclusive, Tiered, Open };

inline const char* access_model_name(AccessModel m) {
    switch (m) {
        case AccessModel::Exclusive: return "EXCLUSIVE";
        case AccessModel::Tiered: return "TIERED";
        case AccessModel::Open: return "OPEN";
    }
    return "?";
}

struct IncumbentSlot {
    BandId band = 0;
    TimeWindow window;
};

// Programmable per-region constraints: which bands exist, under which access
// model, who is shut out entirely, when incumbents own the tiered bands, and
// the regional power ceiling.
struct RegionalProfile {
    RegionId region = 0;
    std::map<BandId, AccessModel> bands;
    std::set<OperatorClass> excluded_classes;
    std::vector<IncumbentSlot> incumbents;
    double power_cap_dbm = 60.0;
};

struct Grant {
    GrantId id = 0;
    TokenId token = 0;
    NodeId holder = 0;
    BandId band = 0;
    RegionId region = 0;
    TimeWindow window;
    double power_cap_dbm = 0.0;
};

enum class TokenCheck : std::uint8_t { Valid, UnrecognizedIssuer, BadSignature, Expired, NotYetValid };

enum class DenialReason : std::uint8_t {
    None,
    UnrecognizedIssuer,
    BadSignature,
    Expired,
    NotYetValid,
    OutOfJurisdiction,
    BandNotEntitled,
    RegionNotEntitled,
    OperatorClassExcluded,
    BandNotAllowed,
    PowerExceeded,
    EmptyWindow,
    WindowOutsideToken,
    WindowTooLong,
    Conflict,
    Timeout, // client-side: the server never answered
};

inline const char* denial_reason_name(DenialReason r) {
    switch (r) {
        case DenialReason::None: return "none";
        case DenialReason::UnrecognizedIssuer: return "UnrecognizedIssuer";
        case DenialReason::BadSignature: return "BadSignature";
        case DenialReason::Expired: return "Expired";
        case DenialReason::NotYetValid: return "NotYetValid";
        case DenialReason::OutOfJurisdiction: return "OutOfJurisdiction";
        case DenialReason::BandNotEntitled: return "BandNotEntitled";
        case DenialReason::RegionNotEntitled: return "RegionNotEntitled";
        case DenialReason::OperatorClassExcluded: return "OperatorClassExcluded";
        case DenialReason::BandNotAllowed: return "BandNotAllowed";
        case DenialReason::PowerExceeded: return "PowerExceeded";
        case DenialReason::EmptyWindow: return "EmptyWindow";
        case DenialReason::WindowOutsideToken: return "WindowOutsideToken";
        case DenialReason::WindowTooLong: return "WindowTooLong";
        case DenialReason::Conflict: return "Conflict";
        case DenialReason::Timeout: return "Timeout";
    }
    return "?";
}

struct GrantRequest {
    EntitlementToken token;
    NodeId holder = 0;
    BandId band = 0;
    RegionId region = 0;
    TimeWindow window;
    double power_dbm = 0.0;
};

struct GrantDecision {
    bool granted = false;
    DenialReason reason = DenialReason::None;
    Grant grant;                        // valid when granted
    std::vector<GrantId> conflicts;     // populated on Denial(Conflict)
};

// Regional licensing authority. Requests run a fixed-order validation
// pipeline where the first failing stage names the denial, which is what
// makes decisions reproducible by an independent checker.
class PolicyServer {
public:
    PolicyServer() = default;
    PolicyServer(AuthorityId authority, MacKey own_key)
        : authority_(std::move(authority)) {
        keyring_[authority_] = own_key;
    }

    const AuthorityId& authority() const { return authority_; }

    // Grant ids must stay unique across authorities so a transmission log
    // audits without knowing who issued what; give each server a disjoint
    // range (ids are issued from base+1 upward, and 0 is reserved for
    // incumbent placeholders in conflict reports).
    void set_grant_id_base(GrantId base) { next_grant_ = base; }

    void add_profile(RegionalProfile p) { profiles_[p.region] = std::move(p); }
    const std::map<RegionId, RegionalProfile>& profiles() const { return profiles_; }

    // Federation: recognize tokens minted by `peer` under `key`.
    void federate(const AuthorityId& peer, const MacKey& key) {
        federation_.insert(peer);
        keyring_[peer] = key;
    }
    const std::set<AuthorityId>& federation() const { return federation_; }

    const std::map<GrantId, Grant>& active_grants() const { return active_; }

    // issuer recognized -> MAC verifies -> clock inside validity. First
    // failure wins; tampering with any signed field lands on BadSignature.
    TokenCheck validate_token(const EntitlementToken& t, SimTime now) const {
        auto key = keyring_.find(t.issuer);
        if (key == keyring_.end()) return TokenCheck::UnrecognizedIssuer;
        if (t.issuer != authority_ && !federation_.count(t.issuer)) {
            return TokenCheck::UnrecognizedIssuer;
        }
        if (siphash24(key->second, token_signing_bytes(t)) != t.mac) {
            return TokenCheck::BadSignature;
        }
        if (now < t.not_before) return TokenCheck::NotYetValid;
        if (now > t.not_after) return TokenCheck::Expired;
        return TokenCheck::Valid;
    }

    // Availability check. EXCLUSIVE: no overlapping grant on (band, region).
    // TIERED: additionally no overlap with an incumbent slot. OPEN: always
    // clear (coexistence assumed). Overlap is half-open-interval overlap.
    std::vector<GrantId> check_conflict(BandId band, RegionId region, TimeWindow window,
                                        const RegionalProfile& profile) const {
        std::vector<GrantId> ids;
        auto model = profile.bands.find(band);
        if (model == profile.bands.end() || model->second == AccessModel::Open) return ids;
        for (const auto& [gid, g] : active_) {
            if (g.band == band && g.region == region && g.window.overlaps(window)) {
                ids.push_back(gid);
            }
        }
        if (model->second == AccessModel::Tiered) {
            for (const auto& slot : profile.incumbents) {
                if (slot.band == band && slot.window.overlaps(window)) {
                    ids.push_back(0); // incumbent pseudo-grant
                }
            }
        }
        return ids;
    }

    GrantDecision request_grant(const GrantRequest& req, SimTime now, const SimConfig& cfg) {
        GrantDecision d;
        auto deny = [&](DenialReason r) {
            d.granted = false;
            d.reason = r;
            return d;
        };

        switch (validate_token(req.token, now)) {
            case TokenCheck::Valid: break;
            case TokenCheck::UnrecognizedIssuer: return deny(DenialReason::UnrecognizedIssuer);
            case TokenCheck::BadSignature: return deny(DenialReason::BadSignature);
            case TokenCheck::Expired: return deny(DenialReason::Expired);
            case TokenCheck::NotYetValid: return deny(DenialReason::NotYetValid);
        }
        auto prof = profiles_.find(req.region);
        if (prof == profiles_.end()) return deny(DenialReason::OutOfJurisdiction);
        if (!req.token.covers_band(req.band)) return deny(DenialReason::BandNotEntitled);
        // ANY-region tokens reach only the issuer's own jurisdiction; regions
        // under another (federated) authority must be named explicitly.
        bool region_entitled = req.token.regions.count(req.region) > 0 ||
                               (req.token.any_region && req.token.issuer == authority_);
        if (!region_entitled) return deny(DenialReason::RegionNotEntitled);
        if (prof->second.excluded_classes.count(req.token.op_class)) {
            return deny(DenialReason::OperatorClassExcluded);
        }
        if (!prof->second.bands.count(req.band)) return deny(DenialReason::BandNotAllowed);
        if (req.power_dbm > req.token.max_power_dbm ||
            req.power_dbm > prof->second.power_cap_dbm) {
            return deny(DenialReason::PowerExceeded);
        }
        if (req.window.empty()) return deny(DenialReason::EmptyWindow);
        if (req.window.start < req.token.not_before || req.window.end > req.token.not_after) {
            return deny(DenialReason::WindowOutsideToken);
        }
        if (req.window.end - req.window.start > cfg.max_grant_duration) {
            return deny(DenialReason::WindowTooLong);
        }
        d.conflicts = check_conflict(req.band, req.region, req.window, prof->second);
        if (!d.conflicts.empty()) return deny(DenialReason::Conflict);

        Grant g;
        g.id = ++next_grant_;
        g.token = req.token.id;
        g.holder = req.holder;
        g.band = req.band;
        g.region = req.region;
        g.window = req.window;
        g.power_cap_dbm = req.power_dbm;
        active_[g.id] = g;
        d.granted = true;
        d.grant = g;
        return d;
    }

    // Removes grants whose window has fully elapsed; returns how many.
    std::size_t expire_grants(SimTime now) {
        std::size_t n = 0;
        for (auto it = active_.begin(); it != active_.end();) {
            if (it->second.window.end <= now) {
                it = active_.erase(it);
                ++n;
            } else {
                ++it;
            }
        }
        return n;
    }

    bool release(GrantId id) { return active_.erase(id) > 0; }

private:
    AuthorityId authority_;
    std::map<RegionId, RegionalProfile> profiles_;
    std::map<GrantId, Grant> active_;
    std::set<AuthorityId> federation_;
    std::map<AuthorityId, MacKey> keyring_;
    GrantId next_grant_ = 0;
};

} // namespace nomadsim
