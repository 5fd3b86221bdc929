#pragma once

#include "nomadsim/geometry.hpp"
#include "nomadsim/ids.hpp"
#include "nomadsim/link.hpp"
#include "nomadsim/time.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace nomadsim {

enum class BearerKind : std::uint8_t { Terrestrial = 0, Satellite = 1 };

inline const char* bearer_kind_name(BearerKind k) {
    return k == BearerKind::Terrestrial ? "TERRESTRIAL" : "SATELLITE";
}

// A backhaul attachment from one node to the core. The priority order of a
// node's bearer list is the order they appear in its configuration.
struct Bearer {
    BearerId id = 0;
    NodeId owner = 0;
    BearerKind kind = BearerKind::Terrestrial;
    LinkModel model;
    bool initially_up = true;
};

enum class DeploymentMode : std::uint8_t { Integrated = 0, Hybrid = 1 };

inline const char* deployment_mode_name(DeploymentMode m) {
    return m == DeploymentMode::Integrated ? "INTEGRATED" : "HYBRID";
}

// Undirected connectivity snapshot over node ids, with the core as the
// distinguished vertex kCoreNode. Used by validators and as the independent
// shortest-path oracle the routing tests compare against.
class Graph {
public:
    void add_node(NodeId n) { adj_[n]; }

    void add_edge(NodeId a, NodeId b) {
        adj_[a].insert(b);
        adj_[b].insert(a);
    }

    bool has_node(NodeId n) const { return adj_.count(n) > 0; }

    const std::set<NodeId>& neighbors(NodeId n) const {
        static const std::set<NodeId> none;
        auto it = adj_.find(n);
        return it == adj_.end() ? none : it->second;
    }

    // Hop distance from `from` to the nearest node satisfying `goal`;
    // nullopt when unreachable. Plain breadth-first search.
    template <typename Goal>
    std::optional<std::size_t> bfs_hops(NodeId from, Goal&& goal) const {
        if (!has_node(from)) return std::nullopt;
        if (goal(from)) return 0;
        std::map<NodeId, std::size_t> dist{{from, 0}};
        std::deque<NodeId> frontier{from};
        while (!frontier.empty()) {
            NodeId cur = frontier.front();
            frontier.pop_front();
            for (NodeId nxt : neighbors(cur)) {
                if (dist.count(nxt)) continue;
                dist[nxt] = dist[cur] + 1;
                if (goal(nxt)) return dist[nxt];
                frontier.push_back(nxt);
            }
        }
        return std::nullopt;
    }

private:
    std::map<NodeId, std::set<NodeId>> adj_;
};

// Builds the instantaneous radio-adjacency graph: an edge wherever two nodes
// sit within discovery range of each other.
inline Graph connectivity_snapshot(const std::map<NodeId, GeoPoint>& positions,
                                   double range_m) {
    Graph g;
    for (const auto& [id, p] : positions) g.add_node(id);
    for (auto a = positions.begin(); a != positions.end(); ++a) {
        for (auto b = std::next(a); b != positions.end(); ++b) {
            if (distance(a->second, b->second) <= range_m) g.add_edge(a->first, b->first);
        }
    }
    return g;
}

} // namespace nomadsim
