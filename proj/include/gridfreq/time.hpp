#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace gridfreq {

/// UTC instant as integer seconds since the Unix epoch plus a fractional
/// offset in [0, 1). Keeping the integer part exact lets sub-microsecond
/// interval arithmetic survive multi-day recordings.
struct UtcTime {
    std::int64_t sec = 0;
    double frac = 0.0;

    static UtcTime from_seconds(std::int64_t s) { return {s, 0.0}; }

    static UtcTime make(std::int64_t s, double f) {
        UtcTime t{s, f};
        t.normalize();
        return t;
    }

    void normalize() {
        if (frac >= 0.0 && frac < 1.0) return;
        double fl = std::floor(frac);
        sec += static_cast<std::int64_t>(fl);
        frac -= fl;
        if (frac >= 1.0) {  // rounding at the top of the interval
            sec += 1;
            frac = 0.0;
        }
    }

    UtcTime plus(double seconds) const { return make(sec, frac + seconds); }

    /// Difference in seconds; exact to double precision for spans well
    /// below 2^52 seconds.
    double diff(const UtcTime& other) const {
        return static_cast<double>(sec - other.sec) + (frac - other.frac);
    }

    bool before_or_at(std::int64_t boundary_sec) const {
        return sec < boundary_sec || (sec == boundary_sec && frac == 0.0);
    }

    std::partial_ordering operator<=>(const UtcTime& o) const {
        if (sec != o.sec) return sec <=> o.sec;
        return frac <=> o.frac;
    }
    bool operator==(const UtcTime& o) const = default;
};

namespace civil {

// Standard proleptic-Gregorian day counting (days since 1970-01-01).
inline std::int64_t days_from_ymd(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void ymd_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace civil

/// "yyyy-MM-dd HH:mm:ss" (UTC), the timestamp format used throughout the
/// CSV data products.
inline std::string format_utc(std::int64_t sec) {
    std::int64_t days = sec / 86400;
    std::int64_t rem = sec % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y, m, d;
    civil::ymd_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

/// Compact variant used in waveform file names: "yyyyMMdd'T'HHmmss'Z'".
inline std::string format_utc_compact(std::int64_t sec) {
    std::int64_t days = sec / 86400;
    std::int64_t rem = sec % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y, m, d;
    civil::ymd_from_days(days, y, m, d);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

inline bool parse_utc(const std::string& s, std::int64_t& out_sec) {
    int y, m, d, hh, mm, ss;
    char sep;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &m, &d, &sep, &hh, &mm, &ss) != 7)
        return false;
    if (sep != ' ' && sep != 'T') return false;
    if (m < 1 || m > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60) return false;
    out_sec = civil::days_from_ymd(y, m, d) * 86400 + hh * 3600 + mm * 60 + ss;
    return true;
}

inline std::int64_t parse_utc_or_throw(const std::string& s) {
    std::int64_t v;
    if (!parse_utc(s, v)) throw std::invalid_argument("unparseable UTC timestamp: '" + s + "'");
    return v;
}

inline bool parse_utc_compact(const std::string& s, std::int64_t& out_sec) {
    int y, m, d, hh, mm, ss;
    if (std::sscanf(s.c_str(), "%4d%2d%2dT%2d%2d%2dZ", &y, &m, &d, &hh, &mm, &ss) != 6)
        return false;
    if (m < 1 || m > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60) return false;
    out_sec = civil::days_from_ymd(y, m, d) * 86400 + hh * 3600 + mm * 60 + ss;
    return true;
}

}  // namespace gridfreq
