#pragma once

#include <charconv>
#include <string>

namespace elastic {

// Shortest decimal string that parses back to exactly v.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace elastic
