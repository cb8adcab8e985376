#pragma once

// Deterministic synthetic image tasks. The digits task mimics the MNIST
// format (28x28 grayscale, 10 classes, IDX-compatible) so every loader and
// experiment path works offline; the patches task is a small 8x8 RGB
// texture-classification problem used as a second benchmark.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rapidnn/dataset.hpp"
#include "rapidnn/tensor.hpp"

namespace rapidnn {

struct DigitSynthConfig {
    double shift_max = 3.0;       // glyph center jitter, pixels
    double rotate_max = 0.25;     // radians
    double scale_base = 3.0;      // pixels per glyph cell
    double scale_jitter = 0.18;   // relative
    double stretch_jitter = 0.12; // extra anisotropic scale, relative
    double stroke_min = 0.55;     // ink intensity range
    double stroke_max = 1.0;
    double noise_sigma = 0.18;    // additive Gaussian pixel noise
};

namespace detail {

// 5x7 digit glyphs, one byte per row, bit 4 = leftmost column.
inline const unsigned char kDigitFont[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
};

inline double glyph_cell(int digit, int col, int row) {
    if (col < 0 || col >= 5 || row < 0 || row >= 7) return 0.0;
    return (kDigitFont[digit][row] >> (4 - col)) & 1 ? 1.0 : 0.0;
}

// Bilinear sample of the glyph treated as a continuous field with cell
// centers at integer coordinates.
inline double glyph_sample(int digit, double u, double v) {
    double fu = std::floor(u), fv = std::floor(v);
    int c0 = static_cast<int>(fu), r0 = static_cast<int>(fv);
    double du = u - fu, dv = v - fv;
    double a = glyph_cell(digit, c0, r0), b = glyph_cell(digit, c0 + 1, r0);
    double c = glyph_cell(digit, c0, r0 + 1), d = glyph_cell(digit, c0 + 1, r0 + 1);
    return (a * (1 - du) + b * du) * (1 - dv) + (c * (1 - du) + d * du) * dv;
}

inline void render_digit(double* img, int side, int digit, std::mt19937_64& rng,
                         const DigitSynthConfig& cfg) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> zero_one(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double cx = side / 2.0 + cfg.shift_max * unit(rng);
    double cy = side / 2.0 + cfg.shift_max * unit(rng);
    double theta = cfg.rotate_max * unit(rng);
    double s = cfg.scale_base * (1.0 + cfg.scale_jitter * unit(rng));
    double sx = s * (1.0 + cfg.stretch_jitter * unit(rng));
    double sy = s * (1.0 + cfg.stretch_jitter * unit(rng));
    double ink = cfg.stroke_min + (cfg.stroke_max - cfg.stroke_min) * zero_one(rng);
    double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            double px = x + 0.5 - cx, py = y + 0.5 - cy;
            double u = (px * ct + py * st) / sx + 2.0;   // glyph is 5 wide
            double v = (-px * st + py * ct) / sy + 3.0;  // and 7 tall
            double val = ink * glyph_sample(digit, u, v) + cfg.noise_sigma * gauss(rng);
            img[y * side + x] = std::clamp(val, 0.0, 1.0);
        }
}

}  // namespace detail

// MNIST-shaped digit recognition task: {n, 28, 28} grayscale in [0,1],
// labels 0..9. Train and test halves come from independent RNG streams of
// the same distribution.
inline Dataset synth_digits(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                            const DigitSynthConfig& cfg = {}) {
    constexpr int side = 28;
    Dataset d;
    std::size_t n = n_train + n_test;
    d.samples = Tensor({n, side, side});
    d.labels.resize(n);
    d.split.resize(n);
    d.num_classes = 10;
    std::mt19937_64 rng_train(seed), rng_test(seed ^ 0x9E3779B97F4A7C15ull);
    for (std::size_t i = 0; i < n; ++i) {
        bool is_test = i >= n_train;
        std::mt19937_64& rng = is_test ? rng_test : rng_train;
        int digit = static_cast<int>(is_test ? (i - n_train) % 10 : i % 10);
        detail::render_digit(d.samples.data.data() + i * side * side, side, digit, rng, cfg);
        d.labels[i] = static_cast<std::size_t>(digit);
        d.split[i] = is_test ? Split::test : Split::train;
    }
    return d;
}

struct PatchSynthConfig {
    double noise_sigma = 0.14;
    double color_jitter = 0.25;
    double phase_jitter = 1.0;  // stripe/checker phase shift range, pixels
};

namespace detail {

// Class templates for the 8x8 RGB task: structure carries the label, colors
// are randomized so nets must learn spatial patterns.
inline double patch_pattern(int cls, double x, double y, double phase, double aux) {
    switch (cls) {
        case 0: return std::sin((y + phase) * 3.14159265358979 / 2.0) > 0 ? 1.0 : 0.0;  // h-stripes
        case 1: return std::sin((x + phase) * 3.14159265358979 / 2.0) > 0 ? 1.0 : 0.0;  // v-stripes
        case 2: return std::sin((x + y + phase) * 3.14159265358979 / 2.0) > 0 ? 1.0 : 0.0;  // diag
        case 3:  // checkerboard
            return ((static_cast<int>(x + phase) / 2 + static_cast<int>(y + aux) / 2) % 2) ? 1.0
                                                                                           : 0.0;
        case 4: {  // centered blob
            double dx = x - 3.5 - phase, dy = y - 3.5 - aux;
            return std::exp(-(dx * dx + dy * dy) / 6.0);
        }
        case 5: {  // ring
            double dx = x - 3.5 - phase, dy = y - 3.5 - aux;
            double r = std::sqrt(dx * dx + dy * dy);
            return std::exp(-(r - 2.5) * (r - 2.5) / 1.2);
        }
        default: throw std::logic_error("patch class out of range");
    }
}

inline void render_patch(double* img, int side, int cls, std::mt19937_64& rng,
                         const PatchSynthConfig& cfg) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> zero_one(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double phase = cfg.phase_jitter * unit(rng);
    double aux = cfg.phase_jitter * unit(rng);
    double fg[3], bg[3];
    for (int c = 0; c < 3; ++c) {
        fg[c] = 0.65 + 0.35 * unit(rng) * cfg.color_jitter + 0.2 * zero_one(rng);
        bg[c] = 0.25 * zero_one(rng);
    }
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            double t = patch_pattern(cls, x, y, phase, aux);
            for (int c = 0; c < 3; ++c) {
                double val = bg[c] + (fg[c] - bg[c]) * t + cfg.noise_sigma * gauss(rng);
                img[(y * side + x) * 3 + c] = std::clamp(val, 0.0, 1.0);
            }
        }
}

}  // namespace detail

// 8x8x3 texture classification task with 6 classes: {n, 8, 8, 3} in [0,1].
inline Dataset synth_patches(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                             const PatchSynthConfig& cfg = {}) {
    constexpr int side = 8;
    constexpr std::size_t classes = 6;
    Dataset d;
    std::size_t n = n_train + n_test;
    d.samples = Tensor({n, side, side, 3});
    d.labels.resize(n);
    d.split.resize(n);
    d.num_classes = classes;
    std::mt19937_64 rng_train(seed), rng_test(seed ^ 0x9E3779B97F4A7C15ull);
    for (std::size_t i = 0; i < n; ++i) {
        bool is_test = i >= n_train;
        std::mt19937_64& rng = is_test ? rng_test : rng_train;
        int cls = static_cast<int>(is_test ? (i - n_train) % classes : i % classes);
        detail::render_patch(d.samples.data.data() + i * side * side * 3, side, cls, rng, cfg);
        d.labels[i] = static_cast<std::size_t>(cls);
        d.split[i] = is_test ? Split::test : Split::train;
    }
    return d;
}

// --- IDX writers (round trip with the readers in dataset.hpp) ----------------

namespace detail {

inline void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

// Writes a [0,1] tensor as unsigned bytes with the tensor's own rank in the
// IDX magic, matching the de-facto big-endian layout.
inline void write_idx_u8(const std::string& path, const Tensor& t) {
    t.check_consistent();
    if (t.shape.empty() || t.shape.size() > 255)
        throw std::invalid_argument("IDX rank must be 1..255");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write IDX file: " + path);
    detail::write_be32(out, 0x00000800u | static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) detail::write_be32(out, static_cast<std::uint32_t>(d));
    std::vector<unsigned char> buf(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        double v = std::clamp(t.data[i], 0.0, 1.0);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_idx_labels(const std::string& path, const std::vector<std::size_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write IDX file: " + path);
    detail::write_be32(out, 0x00000801u);
    detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
    std::vector<unsigned char> buf;
    buf.reserve(labels.size());
    for (std::size_t l : labels) {
        if (l > 255) throw std::invalid_argument("IDX labels must fit one byte");
        buf.push_back(static_cast<unsigned char>(l));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Dumps one split of a dataset as an images/labels IDX pair.
inline void write_idx_dataset(const Dataset& d, Split split, const std::string& images_path,
                              const std::string& labels_path) {
    Dataset sub = d.subset(split);
    if (sub.count() == 0)
        throw std::invalid_argument(std::string("dataset has no ") + to_string(split) + " split");
    write_idx_u8(images_path, sub.samples);
    write_idx_labels(labels_path, sub.labels);
}

}  // namespace rapidnn
