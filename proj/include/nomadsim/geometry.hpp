#pragma once

#include "nomadsim/ids.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace nomadsim {

// Plane coordinates in meters.
struct GeoPoint {
    double x = 0.0;
    double y = 0.0;

    friend constexpr bool operator==(GeoPoint, GeoPoint) = default;
};

inline double distance(GeoPoint a, GeoPoint b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Axis-aligned jurisdiction rectangle. Containment is half-open
// ([x0,x1) x [y0,y1)) so adjacent regions never both claim a border point.
struct Region {
    RegionId id = 0;
    AuthorityId authority;
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(GeoPoint p) const {
        return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
    }
    bool degenerate() const { return x1 <= x0 || y1 <= y0; }
};

// Containing region with the lowest id, or nothing if the point is uncovered.
inline std::optional<RegionId> region_of(GeoPoint p, const std::vector<Region>& regions) {
    std::optional<RegionId> best;
    for (const Region& r : regions) {
        if (r.contains(p) && (!best || r.id < *best)) best = r.id;
    }
    return best;
}

} // namespace nomadsim
