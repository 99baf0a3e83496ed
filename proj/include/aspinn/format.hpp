#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace aspinn {

/// Round-trip-safe decimal (17 significant digits, "nan" for NaN).
inline std::string format_double(double v) {
    if (std::isnan(v))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace aspinn
