#pragma once

#include <compare>
#include <cstdint>

namespace nomadsim {

// Simulated time: integer microseconds since run start. Integer so that
// event ordering is reproducible bit-for-bit across platforms.
struct SimTime {
    std::int64_t usec = 0;

    static constexpr SimTime from_us(std::int64_t v) { return SimTime{v}; }
    static constexpr SimTime from_ms(std::int64_t v) { return SimTime{v * 1000}; }
    static constexpr SimTime from_sec(std::int64_t v) { return SimTime{v * 1'000'000}; }
    static constexpr SimTime zero() { return SimTime{0}; }

    constexpr std::int64_t us() const { return usec; }
    constexpr double as_sec() const { return static_cast<double>(usec) / 1e6; }

    friend constexpr auto operator<=>(SimTime, SimTime) = default;
    friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.usec + b.usec}; }
    friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.usec - b.usec}; }
    constexpr SimTime& operator+=(SimTime b) { usec += b.usec; return *this; }
    friend constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime{a.usec * k}; }
};

namespace literals {
constexpr SimTime operator""_us(unsigned long long v) { return SimTime::from_us(static_cast<std::int64_t>(v)); }
constexpr SimTime operator""_ms(unsigned long long v) { return SimTime::from_ms(static_cast<std::int64_t>(v)); }
constexpr SimTime operator""_sec(unsigned long long v) { return SimTime::from_sec(static_cast<std::int64_t>(v)); }
} // namespace literals

// Half-open interval [start, end) on the simulated clock.
struct TimeWindow {
    SimTime start;
    SimTime end;

    constexpr bool contains(SimTime t) const { return start <= t && t < end; }
    constexpr bool overlaps(const TimeWindow& o) const { return start < o.end && o.start < end; }
    constexpr bool empty() const { return end <= start; }
    friend constexpr bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

} // namespace nomadsim
