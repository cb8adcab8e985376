#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rapidnn/tensor.hpp"

namespace rapidnn {

enum class Split { train, validation, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

// Labeled sample batch. Every sample carries a split tag so one container can
// hold train/validation/test partitions of the same source.
struct Dataset {
    Tensor samples;                   // {N, sample dims...}
    std::vector<std::size_t> labels;  // class ids, one per sample
    std::vector<Split> split;         // one per sample
    std::size_t num_classes = 0;

    std::size_t count() const { return samples.shape.empty() ? 0 : samples.shape[0]; }

    std::size_t sample_size() const {
        return count() == 0 ? 0 : samples.size() / count();
    }

    std::vector<std::size_t> sample_dims() const {
        if (samples.shape.empty()) return {};
        return {samples.shape.begin() + 1, samples.shape.end()};
    }

    void validate() const {
        samples.check_consistent();
        if (samples.shape.empty()) throw std::invalid_argument("dataset has no sample axis");
        if (labels.size() != count() || split.size() != count())
            throw std::invalid_argument("dataset: " + std::to_string(count()) + " samples vs " +
                                        std::to_string(labels.size()) + " labels, " +
                                        std::to_string(split.size()) + " split tags");
        for (std::size_t l : labels)
            if (l >= num_classes)
                throw std::invalid_argument("label " + std::to_string(l) + " out of range for " +
                                            std::to_string(num_classes) + " classes");
    }

    std::size_t count_of(Split s) const {
        std::size_t n = 0;
        for (Split t : split)
            if (t == s) ++n;
        return n;
    }

    // Extracts the samples tagged with one split into a standalone dataset.
    Dataset subset(Split s) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) idx.push_back(i);
        Dataset out = gather(idx);
        for (Split& t : out.split) t = s;
        return out;
    }

    Dataset gather(const std::vector<std::size_t>& idx) const {
        Dataset out;
        std::vector<std::size_t> shape = samples.shape;
        shape[0] = idx.size();
        out.samples = Tensor(shape);
        std::size_t stride = sample_size();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] >= count()) throw std::out_of_range("gather index out of range");
            std::copy_n(samples.data.begin() + idx[r] * stride, stride,
                        out.samples.data.begin() + r * stride);
            out.labels.push_back(labels[idx[r]]);
            out.split.push_back(split[idx[r]]);
        }
        out.num_classes = num_classes;
        return out;
    }

    // Reinterprets each sample with new dims (element count must match);
    // lets one source feed both flat fully-connected and HxWxC inputs.
    void reshape_samples(const std::vector<std::size_t>& dims) {
        if (dims_count(dims) != sample_size())
            throw std::invalid_argument("reshape " + shape_str(sample_dims()) + " -> " +
                                        shape_str(dims) + " changes the element count");
        std::vector<std::size_t> shape{count()};
        shape.insert(shape.end(), dims.begin(), dims.end());
        samples.shape = std::move(shape);
    }

    // Retags the last `fraction` of the train samples as validation, after a
    // seeded shuffle of the train positions so the carve-out is unbiased.
    void carve_validation(double fraction, std::uint64_t seed) {
        if (fraction < 0.0 || fraction >= 1.0)
            throw std::invalid_argument("validation fraction must be in [0,1)");
        std::vector<std::size_t> train_idx;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == Split::train) train_idx.push_back(i);
        std::mt19937_64 rng(seed);
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        std::size_t take = static_cast<std::size_t>(fraction * static_cast<double>(train_idx.size()));
        for (std::size_t i = 0; i < take; ++i) split[train_idx[i]] = Split::validation;
    }
};

// --- IDX (big-endian, MNIST-style) ------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(path + ": truncated IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

// Reads one IDX file into a tensor. Unsigned-byte payloads are scaled by
// 1/255 into [0,1]; other payload types keep their raw values.
inline Tensor read_idx_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open IDX file: " + path);
    std::uint32_t magic = detail::read_be32(in, path);
    if ((magic & 0xFFFF0000u) != 0)
        throw std::runtime_error(path + ": bad IDX magic " + std::to_string(magic));
    std::uint32_t dtype = (magic >> 8) & 0xFF;
    std::uint32_t ndims = magic & 0xFF;
    if (ndims == 0) throw std::runtime_error(path + ": IDX with zero dimensions");
    std::vector<std::size_t> shape;
    for (std::uint32_t d = 0; d < ndims; ++d) shape.push_back(detail::read_be32(in, path));
    Tensor t(shape);
    std::size_t n = t.size();
    auto fail_short = [&](std::size_t want, std::size_t got) {
        throw std::runtime_error(path + ": truncated IDX payload, expected " +
                                 std::to_string(want) + " bytes, got " + std::to_string(got));
    };
    switch (dtype) {
        case 0x08: {  // unsigned byte
            std::vector<unsigned char> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
            if (static_cast<std::size_t>(in.gcount()) != n)
                fail_short(n, static_cast<std::size_t>(in.gcount()));
            for (std::size_t i = 0; i < n; ++i) t.data[i] = buf[i] / 255.0;
            break;
        }
        case 0x0D: {  // 32-bit float, big-endian
            std::vector<unsigned char> buf(n * 4);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
            if (static_cast<std::size_t>(in.gcount()) != n * 4)
                fail_short(n * 4, static_cast<std::size_t>(in.gcount()));
            for (std::size_t i = 0; i < n; ++i) {
                std::uint32_t u = (std::uint32_t(buf[4 * i]) << 24) |
                                  (std::uint32_t(buf[4 * i + 1]) << 16) |
                                  (std::uint32_t(buf[4 * i + 2]) << 8) | std::uint32_t(buf[4 * i + 3]);
                float f;
                static_assert(sizeof(f) == 4);
                std::memcpy(&f, &u, 4);
                t.data[i] = f;
            }
            break;
        }
        default:
            throw std::runtime_error(path + ": unsupported IDX element type " +
                                     std::to_string(dtype));
    }
    return t;
}

// Reads an IDX1 label file (unsigned bytes, raw class ids).
inline std::vector<std::size_t> read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open IDX file: " + path);
    std::uint32_t magic = detail::read_be32(in, path);
    if (magic != 0x00000801u)
        throw std::runtime_error(path + ": expected IDX1 label magic 0x801, got " +
                                 std::to_string(magic));
    std::uint32_t n = detail::read_be32(in, path);
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw std::runtime_error(path + ": truncated IDX payload, expected " + std::to_string(n) +
                                 " bytes, got " + std::to_string(in.gcount()));
    return {buf.begin(), buf.end()};
}

inline Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                Split tag = Split::train) {
    Dataset d;
    d.samples = read_idx_tensor(images_path);
    d.labels = read_idx_labels(labels_path);
    if (d.samples.shape.empty() || d.samples.shape[0] != d.labels.size())
        throw std::runtime_error("IDX image/label count mismatch: " +
                                 std::to_string(d.samples.shape.empty() ? 0 : d.samples.shape[0]) +
                                 " vs " + std::to_string(d.labels.size()));
    d.split.assign(d.labels.size(), tag);
    std::size_t mx = 0;
    for (std::size_t l : d.labels) mx = std::max(mx, l);
    d.num_classes = mx + 1;
    return d;
}

// --- CSV (label, then features) ----------------------------------------------

inline Dataset load_csv_dataset(const std::string& path, Split tag = Split::train) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": cannot parse value '" + cell + "'");
            }
        }
        if (vals.size() < 2)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": row needs a label plus at least one feature");
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(width) + " columns, got " +
                                     std::to_string(vals.size()));
        double lv = vals[0];
        if (lv < 0 || lv != std::floor(lv))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": label must be a non-negative integer");
        labels.push_back(static_cast<std::size_t>(lv));
        rows.push_back({vals.begin() + 1, vals.end()});
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");
    Dataset d;
    d.samples = Tensor({rows.size(), width - 1});
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), d.samples.data.begin() + r * (width - 1));
    d.labels = std::move(labels);
    d.split.assign(rows.size(), tag);
    std::size_t mx = 0;
    for (std::size_t l : d.labels) mx = std::max(mx, l);
    d.num_classes = mx + 1;
    return d;
}

// Format dispatch. For "idx" the path may be "images_file,labels_file"; a bare
// path falls back to the MNIST naming convention (images-idx3 ↔ labels-idx1).
inline Dataset load_dataset(const std::string& path, const std::string& format,
                            Split tag = Split::train) {
    if (format == "csv") return load_csv_dataset(path, tag);
    if (format != "idx") throw std::invalid_argument("unknown dataset format: " + format);
    std::size_t comma = path.find(',');
    if (comma != std::string::npos)
        return load_idx_dataset(path.substr(0, comma), path.substr(comma + 1), tag);
    std::string labels = path;
    std::size_t at = labels.find("images-idx3");
    if (at == std::string::npos)
        throw std::invalid_argument(
            "idx path must be 'images,labels' or follow the *-images-idx3-* naming: " + path);
    labels.replace(at, std::string("images-idx3").size(), "labels-idx1");
    return load_idx_dataset(path, labels, tag);
}

}  // namespace rapidnn
