#pragma once

#include <cstdio>
#include <string>

namespace aidi {

/// Reals in CSV and tensor text output: 9 significant digits, '.' decimal
/// separator, independent of the global locale.
inline std::string format_real(double v, int digits = 9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    std::string s(buf);
    for (char& c : s)
        if (c == ',') c = '.';
    return s;
}

}  // namespace aidi
