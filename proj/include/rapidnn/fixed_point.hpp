#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rapidnn {

// Signed fixed-point format of the accumulation domain. The weighted sum is
// accumulated exactly and rounded once into this grid; out-of-range values
// saturate (and the caller counts the event).
struct FixedFormat {
    unsigned total_bits = 32;
    unsigned frac_bits = 16;

    void validate() const {
        if (total_bits < 2 || total_bits > 63 || frac_bits >= total_bits)
            throw std::invalid_argument("fixed-point format " + std::to_string(total_bits) + "." +
                                        std::to_string(frac_bits) + " is not representable");
    }

    double ulp() const { return std::ldexp(1.0, -static_cast<int>(frac_bits)); }
    std::int64_t max_raw() const { return (std::int64_t(1) << (total_bits - 1)) - 1; }
    std::int64_t min_raw() const { return -(std::int64_t(1) << (total_bits - 1)); }

    // Nearest-grid rounding (half away from zero), saturating.
    std::int64_t to_raw(double v, bool* saturated = nullptr) const {
        double scaled = std::ldexp(v, static_cast<int>(frac_bits));
        std::int64_t raw;
        if (scaled >= static_cast<double>(max_raw())) {
            raw = max_raw();
            if (saturated) *saturated = true;
        } else if (scaled <= static_cast<double>(min_raw())) {
            raw = min_raw();
            if (saturated) *saturated = true;
        } else {
            raw = std::llround(scaled);
        }
        return raw;
    }

    double from_raw(std::int64_t raw) const {
        return std::ldexp(static_cast<double>(raw), -static_cast<int>(frac_bits));
    }

    // One-step round through the grid.
    double round(double v, bool* saturated = nullptr) const { return from_raw(to_raw(v, saturated)); }
};

}  // namespace rapidnn
