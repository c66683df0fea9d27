#pragma once

#include <charconv>
#include <string>

namespace qhawkes::detail {

// Shortest text that reads back to the same double.
inline std::string to_text(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

} // namespace qhawkes::detail
