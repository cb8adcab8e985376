#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rapidnn {

// Dense row-major tensor of doubles. The software path runs in 64-bit
// precision throughout; narrower formats only appear in the accelerator
// model.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(count_of(shape), fill) {}

    static std::size_t count_of(const std::vector<std::size_t>& s) {
        if (s.empty()) return 0;
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool shape_equals(const std::vector<std::size_t>& s) const { return shape == s; }

    void check_consistent() const {
        if (count_of(shape) != data.size())
            throw std::logic_error("tensor shape/data mismatch: shape holds " +
                                   std::to_string(count_of(shape)) + " elements, data holds " +
                                   std::to_string(data.size()));
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    return os.str();
}

inline std::size_t dims_count(const std::vector<std::size_t>& s) { return Tensor::count_of(s); }

}  // namespace rapidnn
