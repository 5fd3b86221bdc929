#pragma once

#include "nomadsim/geometry.hpp"
#include "nomadsim/time.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace nomadsim {

struct Waypoint {
    SimTime at;
    GeoPoint pos;
};

// Time-ordered waypoint list; position is piecewise-linear between waypoints
// and clamps to the endpoints outside the covered span.
struct MobilityTrace {
    std::vector<Waypoint> waypoints;

    bool valid() const {
        if (waypoints.empty()) return false;
        for (std::size_t i = 1; i < waypoints.size(); ++i) {
            if (waypoints[i].at <= waypoints[i - 1].at) return false;
        }
        return true;
    }

    bool stationary() const { return waypoints.size() <= 1; }
};

inline GeoPoint position_at(const MobilityTrace& trace, SimTime t) {
    const auto& wp = trace.waypoints;
    if (t <= wp.front().at) return wp.front().pos;
    if (t >= wp.back().at) return wp.back().pos;
    auto it = std::upper_bound(wp.begin(), wp.end(), t,
                               [](SimTime v, const Waypoint& w) { return v < w.at; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double span = static_cast<double>((b.at - a.at).usec);
    const double frac = static_cast<double>((t - a.at).usec) / span;
    return GeoPoint{a.pos.x + (b.pos.x - a.pos.x) * frac,
                    a.pos.y + (b.pos.y - a.pos.y) * frac};
}

// Candidate instants at which the trace may cross a region edge. Each
// candidate is a microsecond tick at or just after the geometric crossing;
// callers confirm with region_of, so spurious candidates are harmless.
inline std::vector<SimTime> region_crossing_candidates(const MobilityTrace& trace,
                                                       const std::vector<Region>& regions) {
    std::set<std::int64_t> ticks;
    const auto& wp = trace.waypoints;
    std::vector<double> edges;
    for (const Region& r : regions) {
        edges.push_back(r.x0);
        edges.push_back(r.x1);
    }
    std::vector<double> yedges;
    for (const Region& r : regions) {
        yedges.push_back(r.y0);
        yedges.push_back(r.y1);
    }
    for (std::size_t i = 1; i < wp.size(); ++i) {
        const Waypoint& a = wp[i - 1];
        const Waypoint& b = wp[i];
        const double span = static_cast<double>((b.at - a.at).usec);
        auto scan = [&](double pa, double pb, const std::vector<double>& bounds) {
            if (pa == pb) return;
            for (double e : bounds) {
                const double f = (e - pa) / (pb - pa);
                if (f < 0.0 || f > 1.0) continue;
                const double t = static_cast<double>(a.at.usec) + f * span;
                const auto tick = static_cast<std::int64_t>(std::ceil(t));
                ticks.insert(tick);
                ticks.insert(tick + 1);
            }
        };
        scan(a.pos.x, b.pos.x, edges);
        scan(a.pos.y, b.pos.y, yedges);
    }
    std::vector<SimTime> out;
    out.reserve(ticks.size());
    for (std::int64_t t : ticks) out.push_back(SimTime::from_us(t));
    return out;
}

} // namespace nomadsim
