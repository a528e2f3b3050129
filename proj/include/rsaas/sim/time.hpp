#pragma once

#include <chrono>
#include <cstdint>
#include <limits>

namespace rsaas {

/// Virtual clock of one simulation instance. Time zero is simulation start.
struct SimClock {
    using rep = std::int64_t;
    using period = std::nano;
    using duration = std::chrono::duration<rep, period>;
    using time_point = std::chrono::time_point<SimClock>;
    static constexpr bool is_steady = true;
};

using Duration = SimClock::duration;
using SimTime = SimClock::time_point;

inline constexpr SimTime kTimeZero{};
inline constexpr SimTime kTimeNever{Duration{std::numeric_limits<std::int64_t>::max()}};

constexpr Duration from_us(std::int64_t us) { return std::chrono::microseconds{us}; }
constexpr SimTime at_us(std::int64_t us) { return SimTime{from_us(us)}; }

constexpr std::int64_t ns_of(SimTime t) { return t.time_since_epoch().count(); }
constexpr std::int64_t ns_of(Duration d) { return d.count(); }

/// Microseconds as a real number; exact for anything below ~104 days.
constexpr double us_of(Duration d) { return static_cast<double>(d.count()) / 1000.0; }

}  // namespace rsaas
