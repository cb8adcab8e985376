#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rapidnn/network.hpp"

namespace rapidnn {

// Sampled activation function: q (y, z) rows over a saturation-clamped domain
// [A, B]. Lookups return the z of the nearest y, ties to the lower index, so
// queries outside the domain clamp to the boundary rows.
struct ActivationLUT {
    Activation kind = Activation::none;
    std::vector<double> ys;  // ascending; ys.front() = A, ys.back() = B
    std::vector<double> zs;  // zs[i] = activation(ys[i])
    bool exact_relu = false;  // comparator path: bypass the table entirely

    double domain_lo() const { return ys.front(); }
    double domain_hi() const { return ys.back(); }
    std::size_t rows() const { return ys.size(); }

    void validate() const {
        if (exact_relu) return;
        if (ys.empty() || ys.size() != zs.size())
            throw std::invalid_argument("activation table must have matching y/z rows");
        for (std::size_t i = 1; i < ys.size(); ++i)
            if (!(ys[i - 1] < ys[i]))
                throw std::invalid_argument("activation table domain must be strictly ascending");
    }

    std::size_t nearest_row(double y) const {
        std::size_t hi = std::lower_bound(ys.begin(), ys.end(), y) - ys.begin();
        if (hi == 0) return 0;
        if (hi == ys.size()) return ys.size() - 1;
        double d_lo = y - ys[hi - 1], d_hi = ys[hi] - y;
        return d_hi < d_lo ? hi : hi - 1;
    }

    double lookup(double y) const {
        if (exact_relu) return y > 0.0 ? y : 0.0;
        return zs[nearest_row(y)];
    }
};

namespace detail {

// Input range beyond which the function is flat to within `tol` of its
// limit; outside this range table points are wasted.
inline void saturation_bounds(Activation kind, double tol, double& lo, double& hi) {
    lo = -1e300;
    hi = 1e300;
    switch (kind) {
        case Activation::sigmoid:
            // sigmoid(y) < tol  <=>  y < ln(tol/(1-tol))
            lo = std::log(tol / (1.0 - tol));
            hi = -lo;
            break;
        case Activation::softsign:
            // |y/(1+|y|) - sign(y)| < tol  <=>  |y| > 1/tol - 1
            hi = 1.0 / tol - 1.0;
            lo = -hi;
            break;
        case Activation::relu:
            lo = 0.0;  // flat at zero for all non-positive inputs
            break;
        case Activation::none:
        case Activation::softmax:
            break;
    }
}

}  // namespace detail

// Builds the table from observed pre-activation samples: the domain is the
// [0.1, 99.9] percentile span clamped to the function's saturation bounds,
// and interior points are placed at equal-mass quantiles so dense input
// regions get dense sampling.
inline ActivationLUT quantize_activation(Activation kind, std::size_t q,
                                         std::vector<double> observed,
                                         double saturation_tol = 1e-4) {
    if (q < 2) throw std::invalid_argument("activation table needs at least 2 rows");
    if (observed.empty()) throw std::invalid_argument("no pre-activation samples observed");
    if (kind == Activation::softmax)
        throw std::invalid_argument("softmax is not a per-neuron function; no table");
    std::sort(observed.begin(), observed.end());
    if (!std::isfinite(observed.front()) || !std::isfinite(observed.back()))
        throw std::invalid_argument("non-finite pre-activation sample");

    auto percentile = [&](double p) {
        double pos = p / 100.0 * static_cast<double>(observed.size() - 1);
        return observed[static_cast<std::size_t>(pos + 0.5)];
    };
    double lo = percentile(0.1), hi = percentile(99.9);
    double sat_lo, sat_hi;
    detail::saturation_bounds(kind, saturation_tol, sat_lo, sat_hi);
    lo = std::max(lo, sat_lo);
    hi = std::min(hi, sat_hi);

    ActivationLUT lut;
    lut.kind = kind;
    if (!(lo < hi)) {
        // Constant or single-point distribution: one effective row.
        double y = std::min(std::max(percentile(50.0), sat_lo), sat_hi);
        lut.ys = {y};
        lut.zs = {apply_activation(kind, y)};
        return lut;
    }

    // Quantile placement over the observed mass restricted to [lo, hi].
    std::size_t a = std::lower_bound(observed.begin(), observed.end(), lo) - observed.begin();
    std::size_t b = std::upper_bound(observed.begin(), observed.end(), hi) - observed.begin();
    lut.ys.push_back(lo);
    if (b > a) {
        for (std::size_t i = 1; i + 1 < q; ++i) {
            double pos = static_cast<double>(i) / static_cast<double>(q - 1) *
                         static_cast<double>(b - a - 1);
            lut.ys.push_back(observed[a + static_cast<std::size_t>(pos + 0.5)]);
        }
    }
    lut.ys.push_back(hi);
    lut.ys.erase(std::unique(lut.ys.begin(), lut.ys.end()), lut.ys.end());
    // Clamp strictly inside the ends (quantiles can coincide with them).
    lut.ys.erase(std::remove_if(lut.ys.begin() + 1, lut.ys.end() - 1,
                                [&](double y) { return y <= lo || y >= hi; }),
                 lut.ys.end() - 1);
    lut.zs.reserve(lut.ys.size());
    for (double y : lut.ys) lut.zs.push_back(apply_activation(kind, y));
    lut.validate();
    return lut;
}

}  // namespace rapidnn
