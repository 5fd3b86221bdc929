#pragma once

#include "nomadsim/ids.hpp"
#include "nomadsim/time.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nomadsim {

struct UserPacket {
    PacketId id = 0;
    std::string session;
    NodeId origin = 0;
    std::uint64_t size = 0;
    SimTime created;
    SimTime ttl;                // lifetime from creation
    std::vector<NodeId> hops;   // nodes that have forwarded it, origin first

    bool expired(SimTime now) const { return now - created >= ttl; }
};

enum class AdmitOutcome { Admitted, AdmittedWithEvictions, RejectedOversize };

struct AdmitResult {
    AdmitOutcome outcome = AdmitOutcome::Admitted;
    std::vector<UserPacket> evicted; // oldest-first, in eviction order
};

// Bounded FIFO store-and-forward buffer. Admission evicts from the head
// (oldest first) until the newcomer fits; a packet bigger than the whole
// buffer is refused outright. Occupancy never exceeds capacity.
class DtnBuffer {
public:
    explicit DtnBuffer(std::uint64_t capacity_bytes = 0) : capacity_(capacity_bytes) {}

    std::uint64_t capacity() const { return capacity_; }
    std::uint64_t occupancy() const { return occupancy_; }
    std::size_t size() const { return queue_.size(); }
    bool empty() const { return queue_.empty(); }
    const std::deque<UserPacket>& queue() const { return queue_; }

    AdmitResult admit(UserPacket pkt) {
        AdmitResult r;
        if (pkt.size > capacity_) {
            r.outcome = AdmitOutcome::RejectedOversize;
            return r;
        }
        while (occupancy_ + pkt.size > capacity_) {
            r.evicted.push_back(std::move(queue_.front()));
            occupancy_ -= r.evicted.back().size;
            queue_.pop_front();
        }
        r.outcome = r.evicted.empty() ? AdmitOutcome::Admitted
                                      : AdmitOutcome::AdmittedWithEvictions;
        occupancy_ += pkt.size;
        queue_.push_back(std::move(pkt));
        return r;
    }

    UserPacket pop_front() {
        UserPacket p = std::move(queue_.front());
        queue_.pop_front();
        occupancy_ -= p.size;
        return p;
    }

private:
    std::uint64_t capacity_;
    std::uint64_t occupancy_ = 0;
    std::deque<UserPacket> queue_;
};

// A source route to somewhere with core access. dst == kCoreNode means "the
// core, via whichever gateway answered the discovery".
struct Route {
    NodeId dst = kCoreNode;
    std::vector<NodeId> path; // self first, gateway last, loop-free
    std::uint64_t seq = 0;
    SimTime established;
};

// Per-node cache of discovered routes plus the discovery sequence counter.
class RouteCache {
public:
    std::optional<Route> get(NodeId dst) const {
        auto it = routes_.find(dst);
        if (it == routes_.end()) return std::nullopt;
        return it->second;
    }

    void put(Route r) { routes_[r.dst] = std::move(r); }

    void invalidate(NodeId dst) { routes_.erase(dst); }

    // Drops every route that uses `node` as an intermediate or endpoint.
    // Returns how many were invalidated.
    std::size_t invalidate_through(NodeId node) {
        std::size_t n = 0;
        for (auto it = routes_.begin(); it != routes_.end();) {
            const auto& path = it->second.path;
            bool uses = false;
            for (NodeId hop : path) {
                if (hop == node) { uses = true; break; }
            }
            if (uses) {
                it = routes_.erase(it);
                ++n;
            } else {
                ++it;
            }
        }
        return n;
    }

    void clear() { routes_.clear(); }

    // Sequence number for the next route discovery; strictly increasing so a
    // rediscovered route always carries a higher seq than the one it replaces.
    std::uint64_t next_seq() { return ++seq_; }
    std::uint64_t current_seq() const { return seq_; }

private:
    std::map<NodeId, Route> routes_;
    std::uint64_t seq_ = 0;
};

} // namespace nomadsim
