#pragma once

#include <cstdio>
#include <string>

namespace sysid {

/// Decimal text with 17 significant digits (round-trips every double).
/// Negative zero prints as 0.
inline std::string fmt17(double x) {
    if (x == 0.0) x = 0.0;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace sysid
