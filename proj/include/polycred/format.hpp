#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>

namespace polycred {

// Rounds every float in `j` to `digits` significant digits so serialized
// output is stable across platforms. Non-finite values become null.
inline nlohmann::ordered_json rounded(nlohmann::ordered_json j, int digits = 9) {
    if (j.is_number_float()) {
        double v = j.get<double>();
        if (!std::isfinite(v)) return nullptr;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        return std::strtod(buf, nullptr);
    }
    if (j.is_structured())
        for (auto& x : j) x = rounded(std::move(x), digits);
    return j;
}

inline std::string format_float(double v, int digits = 9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace polycred
