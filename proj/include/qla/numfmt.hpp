// Deterministic number formatting helpers.
//
// All persisted numbers (CSV cells, JSON fields) go through these functions
// so that identical binary values always serialize to identical bytes. The
// double formatter emits the shortest decimal string that round-trips to the
// same IEEE-754 value.
#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "qla/errors.hpp"

namespace qla {

/// Shortest round-tripping decimal representation of a double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Parse a decimal string as double; the whole token must be consumed.
inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ValidationError("not a number: '" + s + "'");
    }
    return v;
}

/// Milliseconds <-> seconds at the file-format boundary. Internally the whole
/// suite works in seconds; files carry milliseconds.
inline double ms_to_s(double ms) { return ms / 1000.0; }
inline double s_to_ms(double s) { return s * 1000.0; }

/// Snap a seconds value to a fixed point of the ms-write / ms-read cycle so
/// that serializing and re-reading an instance reproduces it bit-exactly.
/// The map s -> (s*1000)/1000 stabilizes after at most a few applications.
inline double snap_to_ms_roundtrip(double s) {
    for (int i = 0; i < 4; ++i) {
        double next = ms_to_s(s_to_ms(s));
        if (next == s) return s;
        s = next;
    }
    return s;
}

}  // namespace qla
